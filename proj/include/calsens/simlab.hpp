#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "calsens/crossfit.hpp"
#include "calsens/data.hpp"

namespace calsens::simlab {

// Generator identity, parameters and whatever truths are known in closed form.
struct DgpSpec {
    std::string generator;
    std::map<std::string, double> parameters;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::map<std::string, double> truths;
};

// Proxy examples: X, W ~ U(-1,1), A ~ Bern((X + theta W + 2)/4),
// Y = X + theta W + N(0,1). Only X is observed; theta = 1 is example 1.
struct ProxySample {
    Dataset data;
    std::vector<double> w;  // hidden
    double theta = 1.0;
};

ProxySample gen_proxy(std::size_t n, std::uint64_t seed, double theta);
ProxySample gen_proxy_example_1(std::size_t n, std::uint64_t seed);
ProxySample gen_proxy_example_2(std::size_t n, std::uint64_t seed, double theta);

struct ProxyTruths {
    double theta = 1.0;
    double psi_star = 0.0;  // with W observed
    double psi_x = 0.0;
    double psi_empty = 0.0;
    double m() const;       // |psi_x - psi_empty|
    double lower(double gamma) const;
    double upper(double gamma) const;
};

ProxyTruths proxy_truths(double theta);
// Same quantities by nested adaptive quadrature over (X, W).
double proxy_psi_x_quadrature(double theta);
double proxy_psi_empty_quadrature(double theta);

// Proxy coefficient making |psi_* - psi_X| = |psi_X - psi_empty|, found by
// root-finding on the quadrature truths, and its closed form.
double example2_theta();
double example2_theta_closed_form();

DgpSpec proxy_spec(std::size_t n, std::uint64_t seed, double theta);

// True nuisances of the proxy DGP given X (cols = {0}) or nothing (cols = {}).
std::shared_ptr<const NuisanceFactory> proxy_factory(double theta, NuisanceConfig cfg = {});

// Two independent binary covariates, logistic-additive propensity and
// Y = tau A + b1 X1 + b2 X2 + N(0, sigma^2).
struct BinaryDgp {
    double p1 = 0.5, p2 = 0.5;
    double alpha0 = 0.0, alpha1 = 1.0, alpha2 = 1.0;
    double tau = 1.0, b1 = 1.0, b2 = 1.0, sigma = 1.0;
};

struct BinaryTruths {
    double psi = 0.0;
    double component[2] = {0.0, 0.0};  // psi - psi_{-j}
    double m = 0.0;
    std::size_t argmax = 0;
    double gamma0() const;
    double lower(double gamma) const { return psi - gamma * m; }
    double upper(double gamma) const { return psi + gamma * m; }
};

Dataset gen_binary(const BinaryDgp& dgp, std::size_t n, std::uint64_t seed);
BinaryTruths binary_truths(const BinaryDgp& dgp);
DgpSpec binary_spec(const BinaryDgp& dgp, std::size_t n, std::uint64_t seed);

// Smooth DGP on the unit square for the odds model: X ~ U(0,1)^2,
// logit P(A=1|X) = -0.5 + 1.5 X1 - 1.0 X2, Y = 0.5 A + X1 + 0.5 X2 + N(0,1).
Dataset gen_smooth(std::size_t n, std::uint64_t seed);

// Uniform(0,1) outcomes with a binary treatment and one uniform covariate
// that carries no signal; used for the theta closed forms.
Dataset gen_uniform_outcome(std::size_t n, std::uint64_t seed);

}  // namespace calsens::simlab
