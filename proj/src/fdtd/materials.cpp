#include "cbr/fdtd/materials.hpp"

#include <cmath>

#include "cbr/constants.hpp"
#include "cbr/errors.hpp"
#include "cbr/fit.hpp"

namespace cbr::fdtd {

std::complex<double> DrudeMetal::epsilon(double e) const {
    const std::complex<double> i(0.0, 1.0);
    return eps_inf - omega_p_ev * omega_p_ev / (e * e + i * gamma_ev * e);
}

std::complex<double> DrudeMetal::index(double e) const {
    std::complex<double> n = std::sqrt(epsilon(e));
    if (n.imag() < 0.0) n = -n;
    return n;
}

std::complex<double> DrudeMetal::index_at_wavelength(double lambda_nm) const {
    return index(PhysicalConstants::hc_ev_nm / lambda_nm);
}

const std::vector<OpticalConstant>& gold_reference_data() {
    static const std::vector<OpticalConstant> data = {
        {704.5, 0.13, 4.103},
        {756.0, 0.14, 4.542},
        {821.1, 0.16, 5.083},
        {892.0, 0.17, 5.663},
    };
    return data;
}

DrudeMetal fit_drude(const std::vector<OpticalConstant>& data) {
    if (data.size() < 2) throw DataError("Drude fit needs at least two samples");
    // residuals on Re and Im of eps, relative to |eps| of each sample
    fit::FitData fd;
    for (std::size_t s = 0; s < data.size(); ++s) {
        for (int part = 0; part < 2; ++part) {
            fd.x.push_back(static_cast<double>(2 * s + static_cast<std::size_t>(part)));
            fd.y.push_back(0.0);
        }
    }
    std::vector<std::complex<double>> eps;
    std::vector<double> energy;
    for (const auto& d : data) {
        eps.push_back(std::complex<double>(d.n, d.k) * std::complex<double>(d.n, d.k));
        energy.push_back(PhysicalConstants::hc_ev_nm / d.wavelength_nm);
    }
    fit::FitModel model;
    model.n_params = 3;
    model.names = {"eps_inf", "omega_p", "gamma"};
    model.residual = [&](std::span<const double> p, const fit::FitData& d, std::span<double> r) {
        const DrudeMetal m{p[0], p[1], p[2]};
        for (std::size_t k = 0; k < d.size(); ++k) {
            const std::size_t s = k / 2;
            const std::complex<double> diff = (m.epsilon(energy[s]) - eps[s]) / std::abs(eps[s]);
            r[k] = (k % 2 == 0) ? diff.real() : diff.imag();
        }
    };
    model.bounds = {fit::Bound{1.0, 20.0}, fit::Bound{1.0, 20.0}, fit::Bound{1e-4, 1.0}};
    const auto res = fit::least_squares_fit(model, fd, {5.0, 9.0, 0.07});
    if (!res.converged) throw FitError("Drude fit did not converge");
    return DrudeMetal{res.params[0], res.params[1], res.params[2]};
}

double drude_index_error(const DrudeMetal& m, const std::vector<OpticalConstant>& data) {
    double worst = 0.0;
    for (const auto& d : data) {
        const std::complex<double> ref(d.n, d.k);
        worst = std::max(worst, std::abs(m.index_at_wavelength(d.wavelength_nm) - ref) / std::abs(ref));
    }
    return worst;
}

const DrudeMetal& gold_drude() {
    static const DrudeMetal m = fit_drude(gold_reference_data());
    return m;
}

nlohmann::json to_json(const DrudeMetal& m) {
    return {{"eps_inf", m.eps_inf}, {"omega_p_eV", m.omega_p_ev}, {"gamma_eV", m.gamma_ev}};
}

DrudeMetal drude_from_json(const nlohmann::json& j) {
    DrudeMetal m = gold_drude();
    if (j.contains("eps_inf")) m.eps_inf = j.at("eps_inf").get<double>();
    if (j.contains("omega_p_eV")) m.omega_p_ev = j.at("omega_p_eV").get<double>();
    if (j.contains("gamma_eV")) m.gamma_ev = j.at("gamma_eV").get<double>();
    if (!(m.eps_inf >= 1.0) || !(m.omega_p_ev > 0.0) || !(m.gamma_ev > 0.0))
        throw ValidationError("invalid Drude parameters");
    return m;
}

}  // namespace cbr::fdtd
