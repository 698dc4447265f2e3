#pragma once

#include <cstddef>
#include <vector>

namespace ammlab {

/// Constant-product pool between token X and token Y.
///
/// Values are immutable from the point of view of the operations below: each
/// one returns a fresh state. All quantities are plain doubles.
struct PoolState {
  double rx = 0.0;       ///< reserve of token X
  double ry = 0.0;       ///< reserve of token Y
  double l_total = 0.0;  ///< outstanding LP-coin supply
  double phi = 0.0;      ///< taker fee in [0, 1)

  friend bool operator==(const PoolState&, const PoolState&) = default;
};

/// Throws DomainError unless rx, ry, l_total > 0 and phi in [0, 1).
void validate(const PoolState& pool);

struct SwapResult {
  double out = 0.0;  ///< amount of the counter token paid out
  PoolState pool;    ///< pool after the trade
};

struct MintResult {
  double lp_coins = 0.0;
  PoolState pool;
};

struct BurnResult {
  double x = 0.0;
  double y = 0.0;
  PoolState pool;
};

/// Pays y = x(1-phi)ry / (rx + (1-phi)x); the full x (fee included) is
/// added to the X reserve.
SwapResult swap_x_to_y(const PoolState& pool, double x);

/// Mirror of swap_x_to_y; the fee stays in the Y reserve.
SwapResult swap_y_to_x(const PoolState& pool, double y);

/// X per Y.
double marginal_price(const PoolState& pool);

/// Relative tolerance on x/y versus rx/ry accepted by mint.
inline constexpr double kMintRatioTolerance = 1e-9;

MintResult mint(const PoolState& pool, double x, double y);

BurnResult burn(const PoolState& pool, double lp_coins);

/// Fraction of an X-only endowment x to keep so that, after swapping the
/// remaining (1-psi)x to Y in this pool, the held pair sits exactly at the
/// post-swap reserve ratio and can be minted.
double swap_fraction_psi(const PoolState& pool, double x);

/// n independent pools.
using MultiPool = std::vector<PoolState>;

void validate(const MultiPool& pools);

/// n identical pools; convenience for defaults and tests.
MultiPool make_uniform_pools(std::size_t n, double rx, double ry, double l_total, double phi);

}  // namespace ammlab
