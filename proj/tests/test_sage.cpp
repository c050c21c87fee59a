#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "test_support.hpp"

namespace gsabfd::test {
namespace {

AttributedGraph manual_graph(const std::vector<std::vector<std::size_t>>& lists) {
  AttributedGraph g;
  g.m = lists.size();
  g.k = lists.empty() ? 0 : lists[0].size();
  g.self_loop = true;
  for (const auto& l : lists) {
    std::vector<Edge> row;
    for (auto t : l) row.push_back({t, 1.0 / static_cast<double>(l.size()), 1.0});
    g.neighbors.push_back(row);
  }
  return g;
}

SageHyper small_hyper(std::uint64_t seed = 1) {
  SageHyper h;
  h.hidden_dim = 8;
  h.embed_dim = 4;
  h.k = 3;
  h.epochs = 5;
  h.seed = seed;
  return h;
}

// Same oracle as grad_check, against whatever gradients the last backward() left behind.
double fd_error(SageAutoencoder& model, const AttributedGraph& g, const Matrix& x) {
  auto blocks = model.parameter_blocks();
  return nn::max_relative_gradient_error(
      blocks,
      nn::LossDifference([&](double& p, double e) {
        const double saved = p;
        p = saved + e;
        const auto plus = model.reconstruct(g, x);
        p = saved - e;
        const auto minus = model.reconstruct(g, x);
        p = saved;
        return nn::mse_loss_difference(plus, minus, x);
      }),
      1e-5);
}

TEST(SampleNeighbors, CountsAndReplay) {
  const auto g = build_graph(random_matrix(30, 23, 1), 20);
  Rng rng(3);
  std::vector<std::size_t> full;
  for (const auto& e : g.neighbors[4]) full.push_back(e.target);
  EXPECT_EQ(sample_neighbors(g, 4, 1.0, rng), full);

  const auto two = sample_neighbors(g, 4, 0.1, rng);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_NE(two[0], two[1]);
  for (auto id : two) EXPECT_NE(std::find(full.begin(), full.end(), id), full.end());

  const auto half = sample_neighbors(g, 4, 0.5, rng);
  EXPECT_EQ(std::set<std::size_t>(half.begin(), half.end()).size(), 10u);

  Rng a(9), b(9);
  EXPECT_EQ(sample_neighbors(g, 7, 0.3, a), sample_neighbors(g, 7, 0.3, b));
  EXPECT_EQ(error_category([&] { sample_neighbors(g, 0, 0.0, a); }), ErrorCategory::range);
  EXPECT_EQ(error_category([&] { sample_neighbors(g, 0, 1.5, a); }), ErrorCategory::range);
}

TEST(SampleCount, CeilingOfRatio) {
  EXPECT_EQ(sample_count(20, 0.1), 2u);
  EXPECT_EQ(sample_count(20, 0.5), 10u);
  EXPECT_EQ(sample_count(30, 0.7), 21u);
  EXPECT_EQ(sample_count(15, 0.1), 2u);
  EXPECT_EQ(sample_count(5, 0.01), 1u);
  EXPECT_EQ(sample_count(20, 1.0), 20u);
}

TEST(SampleNeighbors, RoughlyUniform) {
  const auto g = build_graph(random_matrix(30, 23, 2), 10);
  std::vector<int> hits(30, 0);
  Rng rng(4);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t)
    for (auto id : sample_neighbors(g, 0, 0.3, rng)) ++hits[id];
  for (const auto& e : g.neighbors[0]) EXPECT_NEAR(hits[e.target] / double(trials), 0.3, 0.02);
}

TEST(AggregateMean, HandCases) {
  const std::vector<double> self{1, 1}, a{3, 1}, b{5, 3};
  const auto m = aggregate_mean(self, {a, b});
  EXPECT_NEAR(m[0], 3.0, 1e-15);
  EXPECT_NEAR(m[1], 5.0 / 3.0, 1e-15);
  EXPECT_EQ(aggregate_mean(self, {}), self);
  const std::vector<double> c{2.5, -1};
  EXPECT_EQ(aggregate_mean(c, {c, c, c}), c);
  const std::vector<double> bad{1, 2, 3};
  EXPECT_EQ(error_category([&] { aggregate_mean(self, {bad}); }), ErrorCategory::range);
}

TEST(SageLayer, TwoNodeHandCase) {
  const auto g = manual_graph({{1}, {0}});
  Matrix h(2, 2);
  h.data = {1, 2, 3, -4};
  // out0 = own0 + mean0, out1 = own1 - mean1
  nn::DenseLayer layer("sage0", 4, 2);
  layer.w(0, 0) = 1;
  layer.w(0, 2) = 1;
  layer.w(1, 1) = 1;
  layer.w(1, 3) = -1;
  const auto plan = make_plan(g, 1.0, false, nullptr);
  const auto out = sage_layer(g, h, layer, plan);
  // both means are ((1+3)/2, (2-4)/2) = (2, -1)
  EXPECT_EQ(out.data, (std::vector<double>{3, 3, 5, 0}));

  const auto lin = sage_layer(g, h, layer, plan, nn::Activation::identity);
  EXPECT_EQ(lin.data, (std::vector<double>{3, 3, 5, -3}));
}

TEST(SageLayer, ZeroInputZeroBiasGivesZero) {
  const auto g = build_graph(random_matrix(12, 23, 3), 4);
  Rng rng(1);
  const auto layer = nn::DenseLayer::xavier("l", 46, 8, rng);
  const auto out = sage_layer(g, Matrix(12, 23), layer, make_plan(g, 0.5, false, &rng));
  for (double v : out.data) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(error_category([&] { sage_layer(g, Matrix(11, 23), layer, make_plan(g, 1.0, false, nullptr)); }),
            ErrorCategory::range);
}

TEST(SageLayer, FullModeIgnoresRng) {
  const auto g = build_graph(random_matrix(20, 23, 5), 6);
  Rng a(1), b(2);
  SageHyper h = small_hyper();
  h.k = 6;
  SageAutoencoder model(h);
  const auto x = random_matrix(20, 23, 6);
  const auto za = model.encode(g, x, Mode::inference, &a);
  const auto zb = model.encode(g, x, Mode::inference, &b);
  EXPECT_EQ(za.data, zb.data);
  EXPECT_EQ(za.data, model.encode(g, x, Mode::inference).data);
}

TEST(MakePlan, WeightedVariantMixesHalfAndHalf) {
  AttributedGraph g;
  g.m = 3;
  g.k = 2;
  g.neighbors = {{{1, 0.75, 0.9}, {2, 0.25, 0.3}}, {{0, 0.5, 0.5}, {2, 0.5, 0.5}}, {{0, 0.5, 0.1}, {1, 0.5, 0.1}}};
  const auto w = make_plan(g, 1.0, true, nullptr);
  EXPECT_EQ(w.self_coef[0], 0.5);
  EXPECT_EQ(w.coef[0], (std::vector<double>{0.375, 0.125}));
  const auto u = make_plan(g, 1.0, false, nullptr);
  EXPECT_NEAR(u.self_coef[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(u.coef[0][1], 1.0 / 3.0, 1e-15);
}

TEST(Encode, RowNormsAreUnitOrZero) {
  const auto x = random_matrix(40, 23, 8);
  const auto g = build_graph(x, 5);
  SageHyper h = small_hyper(2);
  h.k = 5;
  SageAutoencoder model(h);
  Rng rng(1);
  for (auto mode : {Mode::train, Mode::inference}) {
    const auto z = model.encode(g, x, mode, &rng);
    ASSERT_EQ(z.cols, 4u);
    for (std::size_t r = 0; r < z.rows; ++r) {
      const double n = std::sqrt(sum_squares(z.row(r)));
      EXPECT_TRUE(n == 0.0 || std::abs(n - 1.0) <= 1e-9) << "row " << r << " norm " << n;
    }
  }
  const auto zero = model.encode(g, Matrix(40, 23), Mode::inference);
  for (std::size_t r = 0; r < zero.rows; ++r) {
    const double n = std::sqrt(sum_squares(zero.row(r)));
    EXPECT_TRUE(n == 0.0 || std::abs(n - 1.0) <= 1e-9);
  }
}

TEST(Encode, TwinNodesShareEmbeddings) {
  auto x = random_matrix(6, 23, 10);
  std::copy(x.row(0).begin(), x.row(0).end(), x.row(1).begin());
  const auto g = manual_graph({{2, 3, 4}, {2, 3, 4}, {0, 5, 3}, {1, 4, 5}, {5, 2, 0}, {3, 1, 2}});
  SageAutoencoder model(small_hyper(3));
  const auto z = model.encode(g, x, Mode::inference);
  for (std::size_t c = 0; c < z.cols; ++c) EXPECT_EQ(z(0, c), z(1, c));
  bool differs = false;
  for (std::size_t c = 0; c < z.cols; ++c) differs = differs || z(0, c) != z(2, c);
  EXPECT_TRUE(differs);
}

TEST(Encode, PermutationEquivariance) {
  const std::size_t m = 30;
  const auto x = random_matrix(m, 23, 12);
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(6);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix xp(m, 23);
  for (std::size_t i = 0; i < m; ++i) std::copy(x.row(i).begin(), x.row(i).end(), xp.row(perm[i]).begin());
  SageHyper h = small_hyper(4);
  h.k = 5;
  SageAutoencoder model(h);
  const auto z = model.encode(build_graph(x, 5), x, Mode::inference);
  const auto zp = model.encode(build_graph(xp, 5), xp, Mode::inference);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < z.cols; ++c) EXPECT_NEAR(zp(perm[i], c), z(i, c), 1e-12);
}

TEST(Decode, ShapesAndZeroCase) {
  SageAutoencoder model(small_hyper());
  EXPECT_EQ(model.decode(Matrix(7, 4)).rows, 7u);
  EXPECT_EQ(model.decode(Matrix(7, 4)).cols, 23u);
  for (auto& l : model.decoder) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  for (double v : model.decode(random_matrix(3, 4, 1)).data) EXPECT_EQ(v, 0.0);
}

TEST(Model, LayerShapesChain) {
  SageAutoencoder model{SageHyper{}};
  ASSERT_EQ(model.encoder.size(), 2u);
  EXPECT_EQ(model.encoder[0].in, 46u);
  EXPECT_EQ(model.encoder[0].out, 32u);
  EXPECT_EQ(model.encoder[1].in, 64u);
  EXPECT_EQ(model.encoder[1].out, 16u);
  EXPECT_EQ(model.decoder[0].in, 16u);
  EXPECT_EQ(model.decoder[0].out, 32u);
  EXPECT_EQ(model.decoder[1].in, 32u);
  EXPECT_EQ(model.decoder[1].out, 23u);
}

TEST(GradCheck, FullModelOnTenNodes) {
  const auto x = random_matrix(10, 23, 14);
  const auto g = build_graph(x, 3);
  SageHyper h;
  h.k = 3;
  SageAutoencoder model(h);
  EXPECT_LE(grad_check(model, g, x, 1e-5), 1e-4);

  const double before = model.loss(g, x);
  model.encoder[0].weight[0] += 1.0;
  EXPECT_NE(model.loss(g, x), before);
}

TEST(GradCheck, LinearActivationIsTight) {
  const auto x = random_matrix(10, 23, 15);
  const auto g = build_graph(x, 3);
  SageHyper h;
  h.k = 3;
  h.activation = nn::Activation::identity;
  SageAutoencoder model(h);
  EXPECT_LE(grad_check(model, g, x, 1e-5), 1e-7);
}

TEST(GradCheck, WeightedMeanVariant) {
  const auto x = random_matrix(10, 23, 16);
  const auto g = build_graph(x, 3);
  SageHyper h;
  h.k = 3;
  h.weighted_mean = true;
  SageAutoencoder model(h);
  EXPECT_LE(grad_check(model, g, x, 1e-5), 1e-4);
}

TEST(Backward, SampledForwardMatchesFiniteDifferencesOnSamePlan) {
  // With ratio 1 the sampled and full passes coincide, so the train-mode tape must agree with FD.
  const auto x = random_matrix(10, 23, 17);
  const auto g = build_graph(x, 4);
  SageHyper h;
  h.k = 4;
  h.sampling_ratio = 1.0;
  SageAutoencoder model(h);
  Rng rng(1);
  model.zero_grad();
  model.forward(g, x, Mode::train, &rng);
  model.backward();
  EXPECT_LE(fd_error(model, g, x), 1e-4);
}

TEST(Backward, RequiresForward) {
  SageAutoencoder model(small_hyper());
  EXPECT_EQ(error_category([&] { model.backward(); }), ErrorCategory::usage);
  const auto x = random_matrix(8, 23, 1);
  const auto g = build_graph(x, 3);
  model.forward(g, x, Mode::inference);
  model.backward();
  EXPECT_EQ(error_category([&] { model.backward(); }), ErrorCategory::usage);
}

TEST(Model, RejectsMismatchedInput) {
  SageAutoencoder model(small_hyper());
  const auto g = build_graph(random_matrix(8, 23, 1), 3);
  EXPECT_EQ(error_category([&] { model.encode(g, random_matrix(9, 23, 1), Mode::inference); }), ErrorCategory::range);
  EXPECT_EQ(error_category([&] { model.encode(g, random_matrix(8, 22, 1), Mode::inference); }), ErrorCategory::range);
}

TEST(SageHyper, Validation) {
  SageHyper h;
  h.sampling_ratio = 0.0;
  EXPECT_EQ(error_category([&] { h.validate(); }), ErrorCategory::range);
  h = {};
  h.lr = 0.0;
  EXPECT_EQ(error_category([&] { SageAutoencoder m(h); }), ErrorCategory::range);
  h = {};
  h.depth = 0;
  EXPECT_EQ(error_category([&] { h.validate(); }), ErrorCategory::range);
}

// Normal rows cluster around one prototype; fault rows are unrelated.
Matrix clustered(std::size_t normal, std::size_t fault, std::uint64_t seed) {
  const auto proto = random_matrix(1, 23, seed);
  const auto noise = random_matrix(normal + fault, 23, seed + 1, 0.15);
  const auto wild = random_matrix(fault, 23, seed + 2, 1.5);
  Matrix x(normal + fault, 23);
  for (std::size_t r = 0; r < normal + fault; ++r)
    for (std::size_t c = 0; c < 23; ++c) x(r, c) = r < normal ? proto(0, c) + noise(r, c) : wild(r - normal, c);
  return x;
}

TEST(Train, CurveLengthDeterminismAndImprovement) {
  const auto x = clustered(90, 10, 20);
  const auto g = build_graph(x, 10);
  SageHyper h;
  h.k = 10;
  h.epochs = 40;
  h.seed = 5;
  const auto a = train(g, x, h);
  const auto b = train(g, x, h);
  ASSERT_EQ(a.loss_curve.size(), 40u);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  for (std::size_t l = 0; l < a.model.encoder.size(); ++l) EXPECT_EQ(a.model.encoder[l].weight, b.model.encoder[l].weight);
  EXPECT_EQ(a.model.decoder[1].weight, b.model.decoder[1].weight);
  EXPECT_LT(a.loss_curve.back(), a.loss_curve.front());
  EXPECT_EQ(a.model.adam.step, 40u);

  h.seed = 6;
  EXPECT_NE(train(g, x, h).loss_curve, a.loss_curve);
}

TEST(Train, FaultRowsReconstructWorse) {
  const auto x = clustered(180, 20, 30);
  const auto g = build_graph(x, 10);
  SageHyper h;
  h.k = 10;
  h.seed = 2;
  const auto res = train(g, x, h);
  const auto xhat = res.model.reconstruct(g, x);
  double normal = 0.0, fault = 0.0;
  for (std::size_t r = 0; r < 200; ++r) {
    double e = 0.0;
    for (std::size_t c = 0; c < 23; ++c) e += (x(r, c) - xhat(r, c)) * (x(r, c) - xhat(r, c));
    (r < 180 ? normal : fault) += e;
  }
  EXPECT_LT(normal / 180.0, fault / 20.0);
}

TEST(Train, DivergenceReportsEpoch) {
  const auto g = build_graph(random_matrix(20, 23, 40), 3);
  // residuals of 1e160 square to infinity
  const auto x = random_matrix(20, 23, 40, 1e160);
  SageHyper h = small_hyper();
  const auto msg = error_message([&] { train(g, x, h); });
  EXPECT_NE(msg.find("epoch 0"), std::string::npos) << msg;
  EXPECT_EQ(error_category([&] { train(g, x, h); }), ErrorCategory::numeric);
}

TEST(Checkpoint, RoundTripReproducesReconstruction) {
  const auto x = random_matrix(15, 23, 50);
  const auto g = build_graph(x, 3);
  NormStats stats;
  stats.mean.assign(23, 0.5);
  stats.std.assign(23, 2.0);
  const auto res = train(g, x, small_hyper(7), stats);
  const auto j = nlohmann::json::parse(checkpoint_json(res.model).dump());
  const auto back = model_from_checkpoint(j);
  EXPECT_EQ(back.reconstruct(g, x).data, res.model.reconstruct(g, x).data);
  ASSERT_TRUE(back.norm_stats.has_value());
  EXPECT_EQ(*back.norm_stats, stats);
  EXPECT_EQ(back.adam, res.model.adam);
  EXPECT_EQ(back.hyper.seed, 7u);
  EXPECT_EQ(back.hyper.epochs, 5u);
}

TEST(Checkpoint, FormatErrors) {
  const auto good = checkpoint_json(SageAutoencoder(small_hyper()));
  auto j = good;
  j["format"] = "gsabfd-checkpoint/0";
  EXPECT_EQ(error_category([&] { model_from_checkpoint(j); }), ErrorCategory::format);
  j = good;
  j.erase("decoder");
  EXPECT_EQ(error_category([&] { model_from_checkpoint(j); }), ErrorCategory::format);
  j = good;
  j["encoder"].erase(1);
  EXPECT_EQ(error_category([&] { model_from_checkpoint(j); }), ErrorCategory::format);
  j = good;
  j["input_dim"] = 22;
  EXPECT_EQ(error_category([&] { model_from_checkpoint(j); }), ErrorCategory::format);
  j = good;
  j["hyper"]["depth"] = "two";
  EXPECT_EQ(error_category([&] { model_from_checkpoint(j); }), ErrorCategory::format);
}

}  // namespace
}  // namespace gsabfd::test
