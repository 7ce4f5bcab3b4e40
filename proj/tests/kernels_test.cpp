#include <doctest.h>

#include <cstring>
#include <vector>

#include "loadcast/num/kernels.hpp"
#include "loadcast/rng.hpp"

using namespace loadcast;
namespace k = loadcast::num::kernels;
namespace ref = loadcast::num::serial;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

bool bit_identical(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

// The OpenMP kernels must match the serial reference bit for bit, including
// on sizes large enough to actually engage the parallel path.
TEST_CASE("matmul kernels match serial reference exactly") {
  Rng rng(42);
  for (auto [m, kk, n] : {std::array<std::size_t, 3>{3, 4, 2},
                          {1, 7, 5},
                          {96, 12, 6},
                          {257, 64, 33}}) {
    const auto a = random_vec(m * kk, rng);
    const auto b = random_vec(kk * n, rng);
    std::vector<double> c_par(m * n), c_ser(m * n);
    k::mm_nn(c_par.data(), a.data(), b.data(), m, kk, n);
    ref::mm_nn(c_ser.data(), a.data(), b.data(), m, kk, n);
    CHECK(bit_identical(c_par, c_ser));

    // accumulating variants start from the same nonzero state
    auto acc_par = random_vec(m * kk, rng);
    auto acc_ser = acc_par;
    const auto g = random_vec(m * n, rng);
    k::mm_nt_acc(acc_par.data(), g.data(), b.data(), m, n, kk);
    ref::mm_nt_acc(acc_ser.data(), g.data(), b.data(), m, n, kk);
    CHECK(bit_identical(acc_par, acc_ser));

    auto acc2_par = random_vec(kk * n, rng);
    auto acc2_ser = acc2_par;
    k::mm_tn_acc(acc2_par.data(), a.data(), g.data(), m, kk, n);
    ref::mm_tn_acc(acc2_ser.data(), a.data(), g.data(), m, kk, n);
    CHECK(bit_identical(acc2_par, acc2_ser));
  }
}

TEST_CASE("softmax and layer norm kernels match serial reference exactly") {
  Rng rng(7);
  for (auto [m, n] : {std::array<std::size_t, 2>{4, 4}, {96, 96}, {300, 48}}) {
    const auto x = random_vec(m * n, rng);
    std::vector<double> y_par(m * n), y_ser(m * n);
    k::softmax_rows(y_par.data(), x.data(), m, n);
    ref::softmax_rows(y_ser.data(), x.data(), m, n);
    CHECK(bit_identical(y_par, y_ser));

    const auto dy = random_vec(m * n, rng);
    auto dx_par = random_vec(m * n, rng);
    auto dx_ser = dx_par;
    k::softmax_rows_bwd_acc(dx_par.data(), y_par.data(), dy.data(), m, n);
    ref::softmax_rows_bwd_acc(dx_ser.data(), y_ser.data(), dy.data(), m, n);
    CHECK(bit_identical(dx_par, dx_ser));

    const auto gain = random_vec(n, rng);
    const auto bias = random_vec(n, rng);
    std::vector<double> ln_par(m * n), ln_ser(m * n);
    std::vector<double> xh_par(m * n), xh_ser(m * n);
    std::vector<double> inv_par(m), inv_ser(m);
    k::layer_norm_fwd(ln_par.data(), xh_par.data(), inv_par.data(), x.data(),
                      gain.data(), bias.data(), m, n, 1e-5);
    ref::layer_norm_fwd(ln_ser.data(), xh_ser.data(), inv_ser.data(), x.data(),
                        gain.data(), bias.data(), m, n, 1e-5);
    CHECK(bit_identical(ln_par, ln_ser));

    auto ldx_par = random_vec(m * n, rng);
    auto ldx_ser = ldx_par;
    auto dg_par = random_vec(n, rng);
    auto dg_ser = dg_par;
    auto db_par = random_vec(n, rng);
    auto db_ser = db_par;
    k::layer_norm_bwd_acc(ldx_par.data(), dg_par.data(), db_par.data(),
                          dy.data(), xh_par.data(), inv_par.data(),
                          gain.data(), m, n);
    ref::layer_norm_bwd_acc(ldx_ser.data(), dg_ser.data(), db_ser.data(),
                            dy.data(), xh_ser.data(), inv_ser.data(),
                            gain.data(), m, n);
    CHECK(bit_identical(ldx_par, ldx_ser));
    CHECK(bit_identical(dg_par, dg_ser));
    CHECK(bit_identical(db_par, db_ser));
  }
}

TEST_CASE("relu kernels match serial reference exactly") {
  Rng rng(11);
  const std::size_t n = 100000;  // large enough for the parallel path
  const auto x = random_vec(n, rng);
  std::vector<double> y_par(n), y_ser(n);
  k::relu_fwd(y_par.data(), x.data(), n);
  ref::relu_fwd(y_ser.data(), x.data(), n);
  CHECK(bit_identical(y_par, y_ser));

  const auto dy = random_vec(n, rng);
  auto dx_par = random_vec(n, rng);
  auto dx_ser = dx_par;
  k::relu_bwd_acc(dx_par.data(), x.data(), dy.data(), n);
  ref::relu_bwd_acc(dx_ser.data(), x.data(), dy.data(), n);
  CHECK(bit_identical(dx_par, dx_ser));
}
