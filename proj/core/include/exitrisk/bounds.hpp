#pragma once
// Concentration machinery: the Waudby-Smith-Ramdas betting bound relaxed to
// losses in [-B, B], and the Hoeffding-Bentkus p-value used by the
// fixed-sequence testing baseline.

#include <cstddef>
#include <span>
#include <string>

namespace exitrisk {

// Cap for the betting fraction. half_over_b (1/2B) is valid for any loss in
// [-B, B]; one_over_b (1/B) additionally assumes a non-negative true risk,
// which holds for marginally monotone models, and gives a tighter bound.
enum class NuMode { half_over_b, one_over_b };

std::string to_string(NuMode mode);
NuMode nu_mode_from_string(const std::string& s);

struct WsrConfig {
  double delta = 0.1;
  double bound = 1.0;  // B > 0
  NuMode nu_mode = NuMode::one_over_b;
  double epsilon_grid_step = 1e-3;
};

// Upper confidence bound on the mean of i.i.d. losses in [-B, B]:
// P(R <= wsr_upper_bound) >= 1 - delta. Runs the betting recursion
//   mu_i    = (1/2 + sum_{j<=i} l_j) / (i + 1)
//   sigma2_i = (1/4 + sum_{j<=i} (l_j - mu_j)^2) / (i + 1)
//   nu_i    = min(nu_max, sqrt(2 log(1/delta) / (n sigma2_{i-1})))
//   kappa_i(eps) = prod_{j<=i} (1 - nu_j (l_j - eps))
// with sigma2_{-1} = 1, and returns the smallest eps on the ascending grid
// over [0, B] whose capital max_i kappa_i(eps) exceeds 1/delta, or B
// (vacuous) when no grid point qualifies. Capital factors are checked for
// non-negativity as they are produced.
double wsr_upper_bound(std::span<const double> losses, const WsrConfig& cfg);

// min(Hoeffding, Bentkus) p-value for H0: R(lambda) >= epsilon, for an
// empirical risk of losses scaled into [0, 1]. Small p rejects H0.
double hb_pvalue(double empirical_risk, std::size_t n, double epsilon);

}  // namespace exitrisk
