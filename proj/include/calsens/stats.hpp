#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace calsens::stats {

double mean(std::span<const double> x);
// Sample variance with denominator n (the plug-in used for influence-function variances).
double variance(std::span<const double> x);
double sd(std::span<const double> x);
double covariance(std::span<const double> x, std::span<const double> y);
double correlation(std::span<const double> x, std::span<const double> y);

double normal_quantile(double p);
double normal_cdf(double z);

// Full-precision, locale-independent shortest round-trip formatting.
std::string format_double(double v);

// SplitMix64 step; used to derive independent seeds for replicates and workers.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// FNV-1a, stable across platforms (config hashing).
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace calsens::stats
