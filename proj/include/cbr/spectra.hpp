#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbr/constants.hpp"

namespace cbr::spectra {

// Photon energy in eV; always strictly positive.
class PhotonEnergy {
public:
    explicit PhotonEnergy(double ev);
    double ev() const noexcept { return ev_; }
    double nm() const noexcept { return PhysicalConstants::hc_ev_nm / ev_; }

private:
    double ev_;
};

PhotonEnergy nm_to_ev(double wavelength_nm);
double ev_to_nm(PhotonEnergy energy);

enum class AxisKind { wavelength_nm, energy_ev };

std::string to_string(AxisKind kind);
AxisKind axis_kind_from_string(const std::string& s);

// Immutable sampled spectrum. The axis is strictly monotone (either direction);
// intensities are finite and non-negative.
class Spectrum {
public:
    Spectrum(std::vector<double> axis, std::vector<double> intensity, AxisKind kind,
             std::string label = {});

    std::span<const double> axis() const noexcept { return axis_; }
    std::span<const double> intensity() const noexcept { return intensity_; }
    AxisKind axis_kind() const noexcept { return kind_; }
    const std::string& label() const noexcept { return label_; }
    std::size_t size() const noexcept { return axis_.size(); }
    bool ascending() const noexcept { return axis_.size() < 2 || axis_[1] > axis_[0]; }

    // Same samples on an energy (or wavelength) axis, sorted ascending.
    Spectrum to_energy() const;
    Spectrum to_wavelength() const;
    Spectrum sorted_ascending() const;
    Spectrum with_label(std::string label) const;

    // Linear interpolation at an axis value of this spectrum's kind.
    double interpolate(double x) const;
    bool covers(double lo, double hi) const;

private:
    std::vector<double> axis_;
    std::vector<double> intensity_;
    AxisKind kind_;
    std::string label_;
};

// Pointwise ratio cbr/reference. A reference expressed on the other axis kind
// is converted and linearly resampled onto the cbr grid.
Spectrum relative_reflectance(const Spectrum& cbr, const Spectrum& reference);

// Laser energy for resonant two-photon excitation of the biexciton:
// half the biexciton energy, E_X - E_b / 2.
PhotonEnergy tpe_laser_energy(PhotonEnergy exciton, double binding_energy_ev);

struct SpectrumFormat {
    std::optional<AxisKind> axis_kind;  // overrides the file's `axis=` comment
};

Spectrum load_spectrum(const std::string& path, const SpectrumFormat& format = {});
Spectrum parse_spectrum(std::istream& in, const std::string& source_name,
                        const SpectrumFormat& format = {});
void write_spectrum(std::ostream& out, const Spectrum& s);

}  // namespace cbr::spectra
