#pragma once

#include <complex>
#include <vector>

#include "json.hpp"

namespace cbr::fdtd {

// eps(w) = eps_inf - wp^2 / (w^2 + i gamma w), exp(-i w t) convention.
struct DrudeMetal {
    double eps_inf = 1.0;
    double omega_p_ev = 9.0;
    double gamma_ev = 0.07;

    std::complex<double> epsilon(double energy_ev) const;
    std::complex<double> index(double energy_ev) const;  // n + i k with k >= 0
    std::complex<double> index_at_wavelength(double lambda_nm) const;
};

struct OpticalConstant {
    double wavelength_nm = 0.0;
    double n = 0.0;
    double k = 0.0;
};

// Gold, Johnson and Christy (1972), the samples inside 700 - 900 nm.
const std::vector<OpticalConstant>& gold_reference_data();

DrudeMetal fit_drude(const std::vector<OpticalConstant>& data);
// max |n_model - n_data| / |n_data| over the complex index
double drude_index_error(const DrudeMetal& m, const std::vector<OpticalConstant>& data);

// Drude fit to gold_reference_data(), computed once.
const DrudeMetal& gold_drude();

nlohmann::json to_json(const DrudeMetal& m);
DrudeMetal drude_from_json(const nlohmann::json& j);

}  // namespace cbr::fdtd
