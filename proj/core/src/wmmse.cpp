// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/wmmse.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "cfmimo/complex_linalg.hpp"
#include "cfmimo/error.hpp"
#include "cfmimo/rng.hpp"

namespace cfmimo {

void WmmseOptions::validate() const {
  if (max_iters < 1) throw ConfigError("WMMSE needs max_iters >= 1");
  if (!(tolerance > 0.0) || !(bisection_tolerance > 0.0)) {
    throw ConfigError("WMMSE tolerances must be positive");
  }
}

namespace {

void scale_per_ap(PrecoderTensor& f, double p_max) {
  for (std::size_t j = 0; j < f.num_aps(); ++j) {
    double p = 0.0;
    for (std::size_t k = 0; k < f.num_ues(); ++k)
      for (auto z : f.beam(j, k)) p += std::norm(z);
    if (p <= 0.0) continue;
    const double s = std::sqrt(p_max / p);
    for (std::size_t k = 0; k < f.num_ues(); ++k)
      for (auto& z : f.beam(j, k)) z *= s;
  }
}

cdouble inner(std::span<const cdouble> h, std::span<const cdouble> f) {
  cdouble s = 0.0;
  for (std::size_t n = 0; n < h.size(); ++n) s += std::conj(h[n]) * f[n];
  return s;
}

double block_power(const ComplexMatrix& x) {
  double p = 0.0;
  for (auto z : x.entries()) p += std::norm(z);
  return p;
}

ComplexMatrix shifted_solve(const ComplexMatrix& c, double mu, const ComplexMatrix& b) {
  ComplexMatrix a = c;
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += mu;
  return hermitian_solve(a, b);
}

// argmin over the AP block subject to ||X||_F^2 <= p_max. The multiplier is
// bracketed and bisected on the spectral form of ||(C + mu I)^{-1} B||_F^2;
// the block itself is then solved with hermitian_solve.
ComplexMatrix constrained_block(const ComplexMatrix& c, const ComplexMatrix& b, double p_max,
                                double tol) {
  const double bnorm2 = block_power(b);
  if (bnorm2 == 0.0) return ComplexMatrix(b.rows(), b.cols());
  try {
    auto x0 = shifted_solve(c, 0.0, b);
    if (std::isfinite(block_power(x0)) && block_power(x0) <= p_max) return x0;
  } catch (const SingularSystemError&) {
    // singular C: the unconstrained minimizer is unbounded, so mu > 0
  }
  const auto n = static_cast<Eigen::Index>(c.rows());
  Eigen::MatrixXcd cm(n, n), bm(n, static_cast<Eigen::Index>(b.cols()));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index q = 0; q < n; ++q) cm(r, q) = c(static_cast<std::size_t>(r), static_cast<std::size_t>(q));
    for (Eigen::Index q = 0; q < bm.cols(); ++q) bm(r, q) = b(static_cast<std::size_t>(r), static_cast<std::size_t>(q));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(cm);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  const Eigen::VectorXd proj = (es.eigenvectors().adjoint() * bm).rowwise().squaredNorm();
  auto power = [&](double mu) {
    double p = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) p += proj(i) / ((lam(i) + mu) * (lam(i) + mu));
    return p;
  };
  // ||(C + mu I)^{-1} B||_F <= ||B||_F / mu, so this mu is feasible
  double hi = std::sqrt(bnorm2 / p_max);
  int doublings = 0;
  while (!(power(hi) <= p_max)) {
    if (++doublings > 200) throw BisectionError("WMMSE: no feasible multiplier after 200 doublings");
    hi *= 2.0;
  }
  double lo = 0.0;
  while (hi - lo > tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (power(mid) > p_max ? lo : hi) = mid;
  }
  auto x = shifted_solve(c, hi, b);
  // guard the last ulps: never hand back a block above budget
  const double p = block_power(x);
  if (p > p_max) {
    const double s = std::sqrt(p_max / p);
    for (auto& z : x.entries()) z *= s;
  }
  return x;
}

double current_sum_se(const ChannelTensor& h, const PrecoderTensor& f, double noise) {
  return sum_se(h, f, noise).sum_se;
}

}  // namespace

PrecoderTensor scaled_conjugate_precoder(const ChannelTensor& h, double p_max) {
  PrecoderTensor f(h.num_aps(), h.num_ues(), h.num_antennas(), p_max);
  auto src = h.gains();
  auto dst = f.entries();
  std::copy(src.begin(), src.end(), dst.begin());
  scale_per_ap(f, p_max);
  return f;
}

WmmseResult wmmse_solve(const ChannelTensor& h, double p_max, double noise_power,
                        const WmmseOptions& options) {
  options.validate();
  if (!h.all_finite()) throw DomainError("WMMSE: channel has non-finite entries");
  if (!(p_max > 0.0) || !(noise_power > 0.0)) throw DomainError("WMMSE: P_max and noise must be positive");
  const std::size_t L = h.num_aps(), K = h.num_ues(), N = h.num_antennas();

  WmmseResult res;
  if (options.init == WmmseInit::kScaledConjugate) {
    res.precoder = scaled_conjugate_precoder(h, p_max);
  } else {
    res.precoder = PrecoderTensor(L, K, N, p_max);
    CounterRng rng(options.seed, 0x3117);
    for (auto& z : res.precoder.entries()) z = rng.complex_normal();
    scale_per_ap(res.precoder, p_max);
  }
  auto& f = res.precoder;

  // g(k, i) = sum_j h_{j,k}^H f_{j,i}
  ComplexMatrix g(K, K);
  auto refresh_gains = [&] {
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < K; ++i) {
        cdouble s = 0.0;
        for (std::size_t j = 0; j < L; ++j) s += inner(h.link(j, k), f.beam(j, i));
        g(k, i) = s;
      }
  };

  double se = current_sum_se(h, f, noise_power);
  res.trace.push_back(se);
  std::vector<cdouble> u(K);
  std::vector<double> w(K), wu2(K);
  std::vector<cdouble> delta(N);

  for (std::size_t it = 0; it < options.max_iters; ++it) {
    refresh_gains();
    for (std::size_t k = 0; k < K; ++k) {
      double total = noise_power;
      for (std::size_t i = 0; i < K; ++i) total += std::norm(g(k, i));
      u[k] = std::conj(g(k, k)) / total;
      const double mse = 1.0 - std::norm(g(k, k)) / total;
      w[k] = 1.0 / std::max(mse, 1e-300);
      wu2[k] = w[k] * std::norm(u[k]);
    }

    for (std::size_t j = 0; j < L; ++j) {
      ComplexMatrix c(N, N);
      for (std::size_t k = 0; k < K; ++k) {
        const auto hk = h.link(j, k);
        for (std::size_t r = 0; r < N; ++r)
          for (std::size_t s = 0; s < N; ++s) c(r, s) += wu2[k] * hk[r] * std::conj(hk[s]);
      }
      // b_{j,i} = w_i u_i^* h_{j,i} - sum_k w_k |u_k|^2 h_{j,k} (g(k,i) - h_{j,k}^H f_{j,i})
      ComplexMatrix b(N, K);
      for (std::size_t i = 0; i < K; ++i) {
        const auto hi = h.link(j, i);
        const cdouble coef = w[i] * std::conj(u[i]);
        for (std::size_t n = 0; n < N; ++n) b(n, i) = coef * hi[n];
        for (std::size_t k = 0; k < K; ++k) {
          const auto hk = h.link(j, k);
          const cdouble others = g(k, i) - inner(hk, f.beam(j, i));
          const cdouble t = wu2[k] * others;
          for (std::size_t n = 0; n < N; ++n) b(n, i) -= t * hk[n];
        }
      }
      const auto x = constrained_block(c, b, p_max, options.bisection_tolerance);
      // keep g consistent for the next AP block
      for (std::size_t i = 0; i < K; ++i) {
        auto beam = f.beam(j, i);
        for (std::size_t n = 0; n < N; ++n) delta[n] = x(n, i) - beam[n];
        for (std::size_t k = 0; k < K; ++k) g(k, i) += inner(h.link(j, k), delta);
        for (std::size_t n = 0; n < N; ++n) beam[n] = x(n, i);
      }
    }

    const double next = current_sum_se(h, f, noise_power);
    res.trace.push_back(next);
    res.iterations = it + 1;
    const bool done = std::abs(next - se) <= options.tolerance * std::max(se, 1e-300);
    se = next;
    if (done) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace cfmimo
