#include "ammlab/pool.hpp"

#include <cmath>
#include <string>

#include "ammlab/errors.hpp"

namespace ammlab {
namespace {

void require_amount(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
  if (v < 0.0) throw DomainError(std::string(what) + " must be non-negative");
}

void require_positive(double v, const char* what) {
  if (!std::isfinite(v) || v <= 0.0) {
    throw DomainError(std::string(what) + " must be finite and positive");
  }
}

}  // namespace

void validate(const PoolState& pool) {
  if (!(pool.rx > 0.0) || !std::isfinite(pool.rx)) throw DomainError("pool rx must be positive");
  if (!(pool.ry > 0.0) || !std::isfinite(pool.ry)) throw DomainError("pool ry must be positive");
  if (!(pool.l_total > 0.0) || !std::isfinite(pool.l_total)) {
    throw DomainError("pool l_total must be positive");
  }
  if (!(pool.phi >= 0.0 && pool.phi < 1.0)) throw DomainError("pool phi must lie in [0, 1)");
}

void validate(const MultiPool& pools) {
  if (pools.empty()) throw DomainError("at least one pool is required");
  for (const auto& p : pools) validate(p);
}

SwapResult swap_x_to_y(const PoolState& pool, double x) {
  require_amount(x, "swap amount x");
  if (x == 0.0) return {0.0, pool};
  const double ax = (1.0 - pool.phi) * x;
  const double denom = pool.rx + ax;
  // Both legs come from the same denominator so the new reserve never goes
  // through a cancelling subtraction: ry' = ry * rx / (rx + (1-phi)x).
  SwapResult r{pool.ry * (ax / denom), pool};
  r.pool.rx = pool.rx + x;
  r.pool.ry = pool.ry * (pool.rx / denom);
  return r;
}

SwapResult swap_y_to_x(const PoolState& pool, double y) {
  require_amount(y, "swap amount y");
  if (y == 0.0) return {0.0, pool};
  const double ay = (1.0 - pool.phi) * y;
  const double denom = pool.ry + ay;
  SwapResult r{pool.rx * (ay / denom), pool};
  r.pool.rx = pool.rx * (pool.ry / denom);
  r.pool.ry = pool.ry + y;
  return r;
}

double marginal_price(const PoolState& pool) { return pool.rx / pool.ry; }

MintResult mint(const PoolState& pool, double x, double y) {
  require_positive(x, "mint amount x");
  require_positive(y, "mint amount y");
  const double lhs = x * pool.ry;
  const double rhs = y * pool.rx;
  if (std::abs(lhs - rhs) > kMintRatioTolerance * std::abs(lhs)) {
    throw PreconditionError("mint ratio x/y does not match the reserve ratio rx/ry");
  }
  MintResult r{pool.l_total * (x / pool.rx), pool};
  r.pool.rx += x;
  r.pool.ry += y;
  r.pool.l_total += r.lp_coins;
  return r;
}

BurnResult burn(const PoolState& pool, double lp_coins) {
  require_amount(lp_coins, "burn amount l");
  if (lp_coins > pool.l_total) throw DomainError("cannot burn more LP coins than outstanding");
  if (lp_coins == 0.0) return {0.0, 0.0, pool};
  BurnResult r{0.0, 0.0, pool};
  if (lp_coins == pool.l_total) {
    // Full ownership: hand back everything, the pool is drained.
    r.x = pool.rx;
    r.y = pool.ry;
    r.pool.rx = 0.0;
    r.pool.ry = 0.0;
    r.pool.l_total = 0.0;
    return r;
  }
  const double share = lp_coins / pool.l_total;
  r.x = share * pool.rx;
  r.y = share * pool.ry;
  r.pool.rx -= r.x;
  r.pool.ry -= r.y;
  r.pool.l_total -= lp_coins;
  return r;
}

double swap_fraction_psi(const PoolState& pool, double x) {
  require_positive(x, "endowment x");
  const double phi = pool.phi;
  const double u = 4.0 * x * (1.0 - phi) / (pool.rx * (2.0 - phi) * (2.0 - phi));
  // Closed form 1 + (2-phi)R/(2(1-phi)x) * (1 - sqrt(1+u)) with the bracket
  // rationalised as -u / (1 + sqrt(1+u)); the prefactor times u is 2/(2-phi).
  return 1.0 - 2.0 / ((2.0 - phi) * (1.0 + std::sqrt(1.0 + u)));
}

MultiPool make_uniform_pools(std::size_t n, double rx, double ry, double l_total, double phi) {
  MultiPool pools(n, PoolState{rx, ry, l_total, phi});
  validate(pools);
  return pools;
}

}  // namespace ammlab
