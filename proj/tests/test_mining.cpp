#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "antlgp/mining.hpp"

using namespace antlgp;

namespace {

TimeSeriesDataset parse(const std::string& text) {
  std::istringstream is(text);
  return parse_csv(is);
}

TimeSeriesDataset series(std::vector<double> req, std::vector<double> bytes = {}) {
  TimeSeriesDataset ds;
  for (std::size_t i = 0; i < req.size(); ++i) {
    TimeSeriesRow r;
    r.index = static_cast<double>(i);
    r.requests = req[i];
    r.bytes = bytes.empty() ? 2 * req[i] : bytes[i];
    r.origin = i;
    ds.rows.push_back(r);
  }
  return ds;
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Csv, WellFormed) {
  const auto ds = parse("index,requests,bytes\n0,10,100\n1,20,200\n2,15,150\n");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.rows[1].requests, 20.0);
  EXPECT_EQ(ds.rows[2].bytes, 150.0);
  EXPECT_FALSE(ds.has_labels());
  const auto lab = parse("index,requests,bytes,label\n0,1,2,3\n");
  EXPECT_EQ(lab.rows[0].label, 3);
}

TEST(Csv, Errors) {
  EXPECT_NE(error_of("idx,req\n0,1\n").find("header"), std::string::npos);
  EXPECT_NE(error_of("index,requests,bytes\n0,1,2\n1,NaN,3\n").find("row 3"), std::string::npos);
  EXPECT_NE(error_of("index,requests,bytes\n0,1,2\n1,abc,3\n").find("row 3"), std::string::npos);
  EXPECT_NE(error_of("index,requests,bytes\n0,1\n").find("row 2"), std::string::npos);
  EXPECT_NE(error_of("index,requests,bytes\n3,1,2\n3,1,2\n").find("row 3"), std::string::npos);
  EXPECT_THROW(load_csv("/nonexistent/traffic.csv"), DataError);
}

TEST(Csv, WriteReadRoundTrip) {
  Rng rng(4);
  const auto ds = synth_traffic(1, Granularity::kHourly, 0.1, rng);
  std::stringstream ss;
  write_csv(ss, ds);
  const auto back = parse_csv(ss);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.rows[i].requests, ds.rows[i].requests);
    EXPECT_EQ(back.rows[i].bytes, ds.rows[i].bytes);
  }
}

TEST(Normalize, MinMax) {
  const auto n = normalize(series({0, 5, 10}), 1.0);
  EXPECT_EQ(n.rows[0].requests, 0.0);
  EXPECT_EQ(n.rows[1].requests, 0.5);
  EXPECT_EQ(n.rows[2].requests, 1.0);
  const auto c = normalize(series({3, 3, 3}, {7, 7, 7}), 1.0);
  for (const auto& r : c.rows) {
    EXPECT_EQ(r.requests, 0.5);
    EXPECT_EQ(r.bytes, 0.5);
  }
  EXPECT_THROW(normalize(TimeSeriesDataset{}, 0.5), std::invalid_argument);
  EXPECT_THROW(normalize(series({1, 2}), 0.0), std::invalid_argument);
}

TEST(Normalize, StatsFromTrainingRowsOnly) {
  // first ceil(0.5 * 4) = 2 rows span [0, 10]; the test row at 20 maps to 2
  const auto n = normalize(series({0, 10, 5, 20}), 0.5);
  EXPECT_EQ(n.train_rows, 2u);
  EXPECT_EQ(n.rows[3].requests, 2.0);
  EXPECT_EQ(n.rows[2].requests, 0.5);
}

TEST(Normalize, InvertibleOnTrainingSplit) {
  Rng rng(9);
  const auto raw = synth_traffic(2, Granularity::kHourly, 0.2, rng);
  const auto back = denormalize(normalize(raw, 0.8));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_NEAR(back.rows[i].requests, raw.rows[i].requests, 1e-12 * std::max(1.0, raw.rows[i].requests));
    EXPECT_NEAR(back.rows[i].bytes, raw.rows[i].bytes, 1e-12 * std::max(1.0, raw.rows[i].bytes));
  }
}

TEST(Items, FromDataset) {
  const auto n = normalize(series({0, 5, 10, 2}), 1.0);
  const auto items = items_from_dataset(n, {"requests", "bytes"});
  ASSERT_EQ(items.size(), 4u);
  std::set<std::size_t> src;
  for (const auto& it : items) {
    EXPECT_EQ(it.features.size(), 2u);
    src.insert(it.source_index);
  }
  EXPECT_EQ(src.size(), 4u);
  EXPECT_EQ(items[1].features[0], 0.5);
  EXPECT_THROW(items_from_dataset(n, {}), ConfigError);
  EXPECT_THROW(items_from_dataset(n, {"latency"}), ConfigError);
}

TEST(Reindex, SingleClusterKeepsOrder) {
  const auto n = normalize(series({4, 1, 3, 2}), 1.0);
  const std::vector<int> c(4, 0);
  const auto r = reindex_with_clusters(n, c);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(r.rows[i].requests, n.rows[i].requests);
    EXPECT_EQ(r.rows[i].cluster, 0);
  }
}

TEST(Reindex, StableGrouping) {
  const auto ds = series({10, 11, 12, 13, 14, 15});
  const std::vector<int> c{1, 0, 1, 0, 1, 0};
  const auto r = reindex_with_clusters(ds, c);
  const std::vector<double> want{11, 13, 15, 10, 12, 14};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(r.rows[i].requests, want[i]);
    EXPECT_EQ(r.rows[i].index, static_cast<double>(i));
  }
  EXPECT_EQ(r.rows[3].origin, 0u);
  EXPECT_EQ(r.n_clusters, 2);
  EXPECT_THROW(reindex_with_clusters(ds, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST(Reindex, IsAPermutation) {
  Rng rng(12);
  const auto ds = normalize(synth_traffic(1, Granularity::kHourly, 0.1, rng), 0.8);
  std::vector<int> c(ds.size());
  for (int& v : c) v = static_cast<int>(rng.below(5));
  const auto r = reindex_with_clusters(ds, c);
  std::multiset<std::pair<double, double>> a, b;
  for (const auto& row : ds.rows) a.insert({row.requests, row.bytes});
  for (const auto& row : r.rows) b.insert({row.requests, row.bytes});
  EXPECT_EQ(a, b);
}

TEST(Supervised, Windowing) {
  const auto ds = normalize(series({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), 1.0);
  const auto s = make_supervised(ds, 1);
  EXPECT_EQ(s.cases.size(), 9u);
  EXPECT_EQ(s.cases.y.back(), ds.rows.back().requests);
  EXPECT_THROW(make_supervised(ds, 10), std::invalid_argument);
  EXPECT_THROW(make_supervised(ds, 0), std::invalid_argument);
  const auto s3 = make_supervised(ds, 3);
  EXPECT_EQ(s3.cases.size(), 7u);
  EXPECT_EQ(s3.cases.y[0], ds.rows[3].requests);
}

TEST(Supervised, NoLeakage) {
  Rng rng(3);
  const auto ds = normalize(synth_traffic(1, Granularity::kHourly, 0.1, rng), 0.8);
  for (std::size_t h : {1u, 2u, 5u}) {
    const auto s = make_supervised(ds, h);
    for (std::size_t i = 0; i < s.cases.size(); ++i) {
      const std::size_t t = s.input_row[i];
      EXPECT_EQ(t, i);
      EXPECT_EQ(s.target_row[i], t + h);
      const auto in = s.cases.inputs(i);
      // every input field equals row t's own value
      EXPECT_EQ(in[0], ds.rows[t].index);
      EXPECT_EQ(in[1], ds.rows[t].requests);
      EXPECT_EQ(in[2], ds.rows[t].bytes);
    }
  }
}

TEST(Split, ChronologicalAndLeakFree) {
  Rng rng(5);
  const auto ds = normalize(synth_traffic(5, Granularity::kHourly, 0.05, rng), 0.8);
  std::vector<int> c(ds.size());
  for (int& v : c) v = static_cast<int>(rng.below(7));
  const auto re = reindex_with_clusters(ds, c);
  const auto sup = make_supervised(re, 1);
  const auto sp = split_cases(re, sup, 0.8, 0.1);
  const std::size_t train_end = 672;  // ceil(0.8 * 840)
  std::size_t n_test = 0, n_train_side = 0;
  for (std::size_t i = 0; i < sup.cases.size(); ++i) {
    const auto in_o = re.rows[sup.input_row[i]].origin;
    const auto tg_o = re.rows[sup.target_row[i]].origin;
    if (tg_o >= train_end) ++n_test;
    else if (in_o < train_end) ++n_train_side;
  }
  EXPECT_EQ(sp.test.size(), n_test);
  EXPECT_EQ(sp.train.size() + sp.validation.size(), n_train_side);
  EXPECT_GT(sp.validation.size(), 0u);
}

TEST(Fixtures, GaussianClasses) {
  Rng rng(1);
  const auto items = synth_gaussian_classes(4, 200, 0.05, rng);
  ASSERT_EQ(items.size(), 800u);
  for (const auto& it : items) {
    ASSERT_TRUE(it.true_label);
    for (double f : it.features) {
      EXPECT_GE(f, 0.0);
      EXPECT_LE(f, 1.0);
    }
  }
  const auto exact = synth_gaussian_classes(4, 10, 0.0, rng);
  for (const auto& it : exact) {
    for (double f : it.features) EXPECT_TRUE(f == 0.2 || f == 0.8);
  }
}

TEST(Fixtures, ClassesAreSeparated) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const auto items = synth_gaussian_classes(4, 50, 0.05, rng);
    double intra = 0, inter = 0;
    std::size_t ni = 0, ne = 0;
    for (std::size_t a = 0; a < items.size(); ++a)
      for (std::size_t b = a + 1; b < items.size(); ++b) {
        const double d = std::hypot(items[a].features[0] - items[b].features[0],
                                    items[a].features[1] - items[b].features[1]);
        if (items[a].true_label == items[b].true_label) {
          intra += d;
          ++ni;
        } else {
          inter += d;
          ++ne;
        }
      }
    EXPECT_LT(intra / ni, inter / ne);
  }
}

TEST(Fixtures, TrafficShape) {
  Rng rng(2);
  const auto ds = synth_traffic(5, Granularity::kHourly, 0.0, rng);
  ASSERT_EQ(ds.size(), 840u);
  for (std::size_t t = 168; t < 840; ++t) {
    EXPECT_EQ(ds.rows[t].requests, ds.rows[t - 168].requests);
    EXPECT_EQ(ds.rows[t].bytes, ds.rows[t - 168].bytes);
  }
  // peak hours sit in the early afternoon
  std::size_t peak = 0;
  for (std::size_t h = 0; h < 24; ++h)
    if (ds.rows[h].requests > ds.rows[peak].requests) peak = h;
  EXPECT_GE(peak, 11u);
  EXPECT_LE(peak, 17u);
  Rng rng2(2);
  const auto daily = synth_traffic(5, Granularity::kDaily, 0.0, rng2);
  ASSERT_EQ(daily.size(), 35u);
  double sum = 0;
  for (std::size_t h = 0; h < 24; ++h) sum += ds.rows[h].requests;
  EXPECT_NEAR(daily.rows[0].requests, sum, 1e-9 * sum);
}

TEST(Fixtures, WeekdaysBusierThanWeekends) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const auto ds = synth_traffic(5, Granularity::kHourly, 0.3, rng);
    double wd = 0, we = 0;
    std::size_t nwd = 0, nwe = 0;
    for (std::size_t t = 0; t < ds.size(); ++t) {
      if ((t / 24) % 7 < 5) {
        wd += ds.rows[t].requests;
        ++nwd;
      } else {
        we += ds.rows[t].requests;
        ++nwe;
      }
    }
    EXPECT_GT(wd / nwd, we / nwe);
  }
}

TEST(Fixtures, SeedDeterministic) {
  Rng a(77), b(77);
  std::ostringstream sa, sb;
  write_csv(sa, synth_traffic(2, Granularity::kHourly, 0.1, a));
  write_csv(sb, synth_traffic(2, Granularity::kHourly, 0.1, b));
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Report, PersistenceClosedForm) {
  Rng rng(1);
  const auto raw = synth_traffic(5, Granularity::kHourly, 0.0, rng);
  const auto ds = normalize(raw, 0.8);
  const auto sup = make_supervised(ds, 1);
  const auto sp = split_cases(ds, sup, 0.8, 0.1);

  // Noise-free level, normalized by the training extremes: overnight base
  // (profile 0 at 02:00) and the weekday 14:00 peak.
  const double base = 2000, amp = 6000, gain = 1.5;
  auto level = [&](std::size_t t) {
    const double prof = 0.5 * (1 + std::cos(2 * std::numbers::pi * (static_cast<double>(t % 24) - 14) / 24));
    return base + amp * prof * (((t / 24) % 7 < 5) ? gain : 1.0);
  };
  auto norm = [&](double v) { return (v - base) / (amp * gain); };
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t t = 671; t + 1 < 840; ++t, ++n) acc += std::pow(norm(level(t + 1)) - norm(level(t)), 2);
  const double closed = std::sqrt(acc / n);
  ASSERT_EQ(sp.test.size(), n);
  EXPECT_NEAR(persistence_rmse(sp.test), closed, 1e-12);
}

TEST(Report, PerfectProgram) {
  // r0 = in1: predicts the target exactly when target == current requests
  lgp::Cases c;
  for (int i = 0; i < 5; ++i) {
    const double in[4] = {0, i * 0.1, 0, 0};
    c.add(in, i * 0.1);
  }
  lgp::VmLayout l{4, 2, 0, {lgp::Opcode::kAdd, lgp::Opcode::kMul}};
  lgp::Program p{{lgp::Instruction{lgp::Opcode::kMul, 0, {lgp::OperandKind::kInput, 1}, {lgp::OperandKind::kRegister, 1}}.encode()},
                 {}};
  const auto r = report(p, l, c, c);
  EXPECT_EQ(r.rmse_train, 0.0);
  EXPECT_EQ(r.rmse_test, 0.0);
  EXPECT_DOUBLE_EQ(r.cc_test, 1.0);
}

TEST(Report, JsonRoundTrip) {
  Report r{0.1, 0.2, 0.93, 0.25, 42, "00000000deadbeef"};
  const auto j = to_json(r);
  EXPECT_EQ(j.dump(), R"({"rmse_train":0.1,"rmse_test":0.2,"cc_test":0.93,"rmse_persistence":0.25,"seed":42,"config_digest":"00000000deadbeef"})");
  const auto back = report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.rmse_test, 0.2);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.config_digest, r.config_digest);
}
