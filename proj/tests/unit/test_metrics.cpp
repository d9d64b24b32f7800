#include <gtest/gtest.h>

#include <cmath>

#include "json.hpp"
#include "sdeit/metrics.hpp"
#include "support.hpp"

using namespace sdeit;

TEST(Metrics, IdentitySignature) {
  const GridImage t = test::random_image(32, 32, 1);
  const auto r = evaluate_metrics(t, t, SsimConfig{});
  EXPECT_EQ(r.mse, 0.0);
  EXPECT_TRUE(std::isinf(r.psnr) && r.psnr > 0);
  EXPECT_DOUBLE_EQ(r.cc, 1.0);
  EXPECT_NEAR(r.mssim, 1.0, 1e-15);
}

TEST(Metrics, AffineReconstructionHasUnitCorrelation) {
  const GridImage t = test::random_image(16, 16, 2);
  GridImage x = t;
  for (double& v : x.values) v = 2.5 * v - 0.3;
  EXPECT_NEAR(evaluate_metrics(x, t, SsimConfig{}).cc, 1.0, 1e-12);
  for (double& v : x.values) v = -v;
  EXPECT_NEAR(evaluate_metrics(x, t, SsimConfig{}).cc, -1.0, 1e-12);
}

TEST(Metrics, PsnrFromKnownError) {
  GridImage t(10, 10);
  for (std::size_t i = 0; i < t.size(); ++i) t.values[i] = double(i % 2);  // range [0,1]
  GridImage x = t;
  for (std::size_t i = 0; i < x.size(); ++i) x.values[i] += (i % 3 == 0) ? 0.1 : -0.1;
  const auto r = evaluate_metrics(x, t, SsimConfig{3});
  EXPECT_NEAR(r.mse, 0.01, 1e-15);
  EXPECT_NEAR(r.psnr, 20.0, 1e-12);
  MetricsOptions opts;
  opts.max_i = 10.0;
  EXPECT_NEAR(evaluate_metrics(x, t, SsimConfig{3}, opts).psnr, 40.0, 1e-12);
}

TEST(Metrics, PsnrDecreasesWithError) {
  const GridImage t = test::random_image(16, 16, 3);
  double last = std::numeric_limits<double>::infinity();
  for (double eps : {0.01, 0.02, 0.05, 0.1}) {
    GridImage x = t;
    for (std::size_t i = 0; i < x.size(); ++i) x.values[i] += (i % 2 ? eps : -eps);
    const double p = evaluate_metrics(x, t, SsimConfig{}).psnr;
    EXPECT_LT(p, last);
    last = p;
  }
}

TEST(Metrics, DataRangeFollowsTruth) {
  GridImage t = test::random_image(16, 16, 4, 0.25, 1.5);
  t.values[0] = 0.25;
  t.values[1] = 1.5;
  const GridImage x = test::random_image(16, 16, 5, 0.25, 1.5);
  const auto r = evaluate_metrics(x, t, SsimConfig{});
  EXPECT_DOUBLE_EQ(r.ssim.data_range, 1.25);
  SsimConfig cfg;
  cfg.data_range = 1.25;
  EXPECT_DOUBLE_EQ(r.mssim, mssim(x, t, cfg));
}

TEST(Metrics, BackgroundFillAndMasking) {
  GridImage t = test::random_image(16, 16, 6);
  for (int r = 0; r < 16; ++r) t.mask[std::size_t(r) * 16] = 0;
  for (int r = 0; r < 16; ++r) t.values[std::size_t(r) * 16] = 0.0;
  GridImage x = t;
  for (int r = 0; r < 16; ++r) x.values[std::size_t(r) * 16] = 9.0;
  MetricsOptions fill;
  fill.background = 0.0;
  EXPECT_EQ(evaluate_metrics(x, t, SsimConfig{}, fill).mse, 0.0);
  MetricsOptions masked;
  masked.masked = true;
  const auto r = evaluate_metrics(x, t, SsimConfig{}, masked);
  EXPECT_EQ(r.mse, 0.0);
  EXPECT_TRUE(r.masked);
  EXPECT_GT(evaluate_metrics(x, t, SsimConfig{}).mse, 0.0);
}

TEST(Metrics, InvalidInputs) {
  const GridImage t = test::random_image(16, 16, 7);
  EXPECT_THROW(evaluate_metrics(test::random_image(15, 16, 8), t, SsimConfig{}), MetricsError);
  EXPECT_THROW(evaluate_metrics(t, GridImage(16, 16, 1.0), SsimConfig{}), MetricsError);
  EXPECT_THROW(evaluate_metrics(GridImage(16, 16, 1.0), t, SsimConfig{}), MetricsError);
}

TEST(Metrics, Serialisation) {
  const GridImage t = test::random_image(16, 16, 9);
  const auto r = evaluate_metrics(t, t, SsimConfig{});
  const auto doc = nlohmann::json::parse(metrics_to_json(r));
  for (const char* key : {"mssim", "psnr", "mse", "cc", "grid", "ssim", "masked"}) {
    EXPECT_TRUE(doc.contains(key)) << key;
  }
  EXPECT_EQ(doc["psnr"], "inf");
  EXPECT_EQ(doc["grid"]["width"], 16);
  EXPECT_EQ(metrics_csv_header(), "case,mssim,cc,psnr,mse");
  EXPECT_EQ(metrics_csv_row("id", r), "id,1,1,inf,0");
}
