#include <doctest.h>

#include <cmath>
#include <vector>

#include "diral/channel.hpp"

using namespace diral;

namespace {

// Independent brute-force decode oracle for threshold mode: enumerates every
// (receiver, resource) decision directly from positions, with no shared code
// path beyond the wrap distance helper.
struct OracleDecode {
  std::vector<std::vector<bool>> decoded;  // [rx][tx]
};

OracleDecode oracle_threshold(const ResourceAssignment& a, const std::vector<double>& pos,
                              double highway, const ChannelParams& p) {
  const int n = static_cast<int>(a.size());
  auto gain = [&](int from, int to) {
    double d = std::max(wrap_distance(pos[from], pos[to], highway), p.reference_distance);
    return std::pow(d / p.reference_distance, -p.pathloss_exponent);
  };
  const double ptx = std::pow(10.0, p.tx_power_dbm / 10.0);
  const double noise = std::pow(10.0, p.noise_power_dbm / 10.0);
  OracleDecode out;
  out.decoded.assign(n, std::vector<bool>(n, false));
  for (int rx = 0; rx < n; ++rx) {
    for (int res = 0; res < 1 + *std::max_element(a.begin(), a.end()); ++res) {
      if (a[rx] == res) continue;  // half-duplex
      // pick the highest-SINR transmitter on this resource
      int best = -1;
      double best_sinr = -1;
      for (int tx = 0; tx < n; ++tx) {
        if (tx == rx || a[tx] != res) continue;
        double interference = 0;
        for (int o = 0; o < n; ++o)
          if (o != tx && o != rx && a[o] == res) interference += ptx * gain(o, rx);
        // the receiver itself never interferes: it is not transmitting on res
        double s = ptx * gain(tx, rx) / (noise + interference);
        if (s > best_sinr) {
          best_sinr = s;
          best = tx;
        }
      }
      if (best >= 0 && 10.0 * std::log10(best_sinr) >= p.sinr_threshold_db)
        out.decoded[rx][best] = true;
    }
  }
  return out;
}

double oracle_prr(int tx, const OracleDecode& d, const std::vector<double>& pos, double highway,
                  double comm_range) {
  int neigh = 0, ok = 0;
  for (int j = 0; j < static_cast<int>(pos.size()); ++j) {
    if (j == tx || wrap_distance(pos[tx], pos[j], highway) > comm_range) continue;
    ++neigh;
    if (d.decoded[j][tx]) ++ok;
  }
  return neigh == 0 ? 1.0 : static_cast<double>(ok) / neigh;
}

}  // namespace

TEST_CASE("channel_gain follows the clamped power law") {
  ChannelParams p;
  CHECK(channel_gain(1.0, p) == doctest::Approx(1.0));
  CHECK(channel_gain(0.0, p) == doctest::Approx(1.0));  // clamped to d0
  CHECK(channel_gain(10.0, p) == doctest::Approx(1e-3));
  // monotone non-increasing
  double prev = channel_gain(0.5, p);
  for (double d = 1.0; d < 300.0; d += 7.3) {
    double g = channel_gain(d, p);
    CHECK(g <= prev + 1e-15);
    prev = g;
  }
}

TEST_CASE("sinr: no interferer at 1 m is noise-limited") {
  ChannelParams p;
  WorldState w;
  w.positions = {0.0, 1.0};
  ResourceAssignment a = {0, 1};
  auto g = sinr(1, 0, a, w, p, 100.0);
  REQUIRE(g.has_value());
  CHECK(lin_to_db(*g) == doctest::Approx(23.0 + 95.0));  // 10^11.8 linear

  // half-duplex: same resource yields no SINR
  ResourceAssignment same = {0, 0};
  CHECK_FALSE(sinr(1, 0, same, w, p, 100.0).has_value());
}

TEST_CASE("sinr: equidistant interferer caps the ratio below 1") {
  ChannelParams p;
  WorldState w;
  w.positions = {10.0, 30.0, 50.0};  // tx 0 and interferer 2 both 20 m from rx 1
  ResourceAssignment a = {0, 1, 0};
  auto g = sinr(1, 0, a, w, p, 1000.0);
  REQUIRE(g.has_value());
  CHECK(*g < 1.0);
}

TEST_CASE("p_err threshold and sigmoid modes") {
  ChannelParams p;
  p.sinr_threshold_db = 5.0;
  CHECK(p_err(std::pow(10.0, 0.5), p) == doctest::Approx(0.0));  // exactly at threshold
  CHECK(p_err(std::pow(10.0, 0.49), p) == doctest::Approx(1.0));

  p.bler_mode = BlerMode::sigmoid;
  p.sigmoid_midpoint_db = 5.0;
  p.sigmoid_slope = 0.7;
  CHECK(p_err(std::pow(10.0, 0.5), p) == doctest::Approx(0.5));
  CHECK(p_err(1e30, p) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(p_err(0.0, p) == doctest::Approx(1.0));
}

TEST_CASE("evaluate_slot: basic decode rules") {
  ChannelParams p;
  Rng rng(5);
  WorldState w;
  w.positions = {0.0, 30.0};

  SUBCASE("two vehicles on distinct resources decode each other") {
    ResourceAssignment a = {0, 1};
    auto out = evaluate_slot(a, w, p, 1000.0, rng);
    CHECK(out.decoded(0, 1));
    CHECK(out.decoded(1, 0));
  }
  SUBCASE("same resource: half-duplex blocks both") {
    ResourceAssignment a = {1, 1};
    auto out = evaluate_slot(a, w, p, 1000.0, rng);
    CHECK_FALSE(out.decoded(0, 1));
    CHECK_FALSE(out.decoded(1, 0));
  }
}

TEST_CASE("evaluate_slot range_based: nearest same-resource transmitter wins") {
  ChannelParams p;
  p.channel_mode = ChannelMode::range_based;
  p.comm_range = 150.0;
  Rng rng(5);
  WorldState w;
  w.positions = {100.0, 180.0, 120.0};  // A=0, B=1, C=2; A closer to C than B
  ResourceAssignment a = {0, 0, 1};     // A,B share resource 0; C on resource 1
  auto out = evaluate_slot(a, w, p, 1000.0, rng);
  CHECK(out.decoded(2, 0));        // C decodes A only
  CHECK_FALSE(out.decoded(2, 1));
  CHECK(out.decoded(0, 2));        // A and B decode C
  CHECK(out.decoded(1, 2));
  CHECK_FALSE(out.decoded(0, 1));  // half-duplex between A and B
  CHECK_FALSE(out.decoded(1, 0));

  // out of range: nobody decodes
  w.positions = {0.0, 400.0, 790.0};
  a = {0, 1, 2};
  out = evaluate_slot(a, w, p, 1600.0, rng);
  CHECK_FALSE(out.decoded(0, 1));
  CHECK_FALSE(out.decoded(1, 0));
}

TEST_CASE("prr arithmetic and isolated sentinel") {
  ChannelParams p;
  Rng rng(1);
  WorldState w;
  w.positions = {0.0, 10.0, 20.0, 30.0, 40.0};
  ResourceAssignment a = {0, 1, 2, 3, 4};
  auto out = evaluate_slot(a, w, p, 1000.0, rng);
  PrrResult r = prr(0, out, w, 150.0, 1000.0);
  CHECK(r.value == doctest::Approx(1.0));
  CHECK_FALSE(r.isolated);

  // no neighbors in range
  PrrResult iso = prr(0, out, w, 5.0, 1000.0);
  CHECK(iso.value == doctest::Approx(1.0));
  CHECK(iso.isolated);
}

TEST_CASE("prr matches the brute-force oracle for all joint assignments") {
  ChannelParams p;  // threshold mode
  const double highway = 400.0;
  const double comm_range = 150.0;
  WorldState w;

  SUBCASE("N=4, K=3") {
    w.positions = {10.0, 60.0, 200.0, 390.0};
    const int n = 4, k = 3;
    Rng rng(11);
    for (int code = 0; code < 81; ++code) {
      int c = code;
      ResourceAssignment a(n);
      for (int i = 0; i < n; ++i) {
        a[i] = c % k;
        c /= k;
      }
      auto out = evaluate_slot(a, w, p, highway, rng);
      auto oracle = oracle_threshold(a, w.positions, highway, p);
      for (int tx = 0; tx < n; ++tx) {
        double expect = oracle_prr(tx, oracle, w.positions, highway, comm_range);
        CHECK(prr(tx, out, w, comm_range, highway).value == doctest::Approx(expect));
      }
    }
  }
  SUBCASE("N=5, K=3") {
    w.positions = {0.0, 45.0, 120.0, 260.0, 330.0};
    const int n = 5, k = 3;
    Rng rng(13);
    for (int code = 0; code < 243; ++code) {
      int c = code;
      ResourceAssignment a(n);
      for (int i = 0; i < n; ++i) {
        a[i] = c % k;
        c /= k;
      }
      auto out = evaluate_slot(a, w, p, highway, rng);
      auto oracle = oracle_threshold(a, w.positions, highway, p);
      for (int tx = 0; tx < n; ++tx) {
        double expect = oracle_prr(tx, oracle, w.positions, highway, comm_range);
        CHECK(prr(tx, out, w, comm_range, highway).value == doctest::Approx(expect));
      }
    }
  }
}

TEST_CASE("threshold-mode prr is monotone non-increasing in the threshold") {
  ChannelParams p;
  WorldState w;
  w.positions = {0.0, 40.0, 90.0, 140.0, 210.0, 350.0};
  ResourceAssignment a = {0, 1, 0, 2, 1, 2};
  double prev_mean = 1.1;
  for (double thr = -10.0; thr <= 40.0; thr += 2.5) {
    p.sinr_threshold_db = thr;
    Rng rng(3);
    auto out = evaluate_slot(a, w, p, 400.0, rng);
    double mean = 0;
    for (int tx = 0; tx < 6; ++tx) mean += prr(tx, out, w, 150.0, 400.0).value;
    mean /= 6.0;
    CHECK(mean <= prev_mean + 1e-12);
    prev_mean = mean;
  }
}

TEST_CASE("at most one decode per receiver per resource") {
  ChannelParams p;
  WorldState w;
  w.positions = {5.0, 17.0, 93.0, 121.0, 260.0, 301.0, 377.0};
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    ResourceAssignment a(7);
    for (auto& x : a) x = rng.uniform_int(0, 2);
    auto out = evaluate_slot(a, w, p, 400.0, rng);
    for (int rx = 0; rx < 7; ++rx) {
      for (int res = 0; res < 3; ++res) {
        int decodes = 0;
        for (int tx = 0; tx < 7; ++tx)
          if (tx != rx && a[tx] == res && out.decoded(rx, tx)) ++decodes;
        CHECK(decodes <= 1);
      }
    }
  }
}
