#include "cbr/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "cbr/csv.hpp"
#include "cbr/errors.hpp"

namespace cbr::spectra {

PhotonEnergy::PhotonEnergy(double ev) : ev_(ev) {
    if (!(ev > 0.0) || !std::isfinite(ev))
        throw DomainError("photon energy must be positive and finite", std::to_string(ev));
}

PhotonEnergy nm_to_ev(double wavelength_nm) {
    if (!(wavelength_nm > 0.0) || !std::isfinite(wavelength_nm))
        throw DomainError("wavelength must be positive", std::to_string(wavelength_nm));
    return PhotonEnergy(PhysicalConstants::hc_ev_nm / wavelength_nm);
}

double ev_to_nm(PhotonEnergy energy) { return PhysicalConstants::hc_ev_nm / energy.ev(); }

std::string to_string(AxisKind kind) {
    return kind == AxisKind::wavelength_nm ? "wavelength_nm" : "energy_eV";
}

AxisKind axis_kind_from_string(const std::string& s) {
    if (s == "wavelength_nm" || s == "wavelength" || s == "nm") return AxisKind::wavelength_nm;
    if (s == "energy_eV" || s == "energy_ev" || s == "energy" || s == "eV") return AxisKind::energy_ev;
    throw ParseError("unknown axis kind '" + s + "'");
}

Spectrum::Spectrum(std::vector<double> axis, std::vector<double> intensity, AxisKind kind,
                   std::string label)
    : axis_(std::move(axis)), intensity_(std::move(intensity)), kind_(kind), label_(std::move(label)) {
    if (axis_.size() != intensity_.size())
        throw ShapeError("axis and intensity lengths differ",
                         std::to_string(axis_.size()) + " vs " + std::to_string(intensity_.size()));
    if (axis_.empty()) throw ValidationError("spectrum is empty");
    for (std::size_t i = 0; i < axis_.size(); ++i) {
        if (!std::isfinite(axis_[i]) || axis_[i] <= 0.0)
            throw ValidationError("axis value must be positive and finite", "index " + std::to_string(i));
        if (!std::isfinite(intensity_[i]))
            throw ValidationError("intensity is not finite", "index " + std::to_string(i));
        if (intensity_[i] < 0.0)
            throw ValidationError("intensity is negative", "index " + std::to_string(i));
    }
    if (axis_.size() >= 2) {
        const bool up = axis_[1] > axis_[0];
        for (std::size_t i = 1; i < axis_.size(); ++i) {
            const bool ok = up ? axis_[i] > axis_[i - 1] : axis_[i] < axis_[i - 1];
            if (!ok) throw ValidationError("axis is not strictly monotone", "index " + std::to_string(i));
        }
    }
}

Spectrum Spectrum::sorted_ascending() const {
    if (ascending()) return *this;
    std::vector<double> a(axis_.rbegin(), axis_.rend());
    std::vector<double> v(intensity_.rbegin(), intensity_.rend());
    return Spectrum(std::move(a), std::move(v), kind_, label_);
}

Spectrum Spectrum::to_energy() const {
    if (kind_ == AxisKind::energy_ev) return sorted_ascending();
    std::vector<double> a(axis_.size());
    std::transform(axis_.begin(), axis_.end(), a.begin(),
                   [](double nm) { return PhysicalConstants::hc_ev_nm / nm; });
    return Spectrum(std::move(a), intensity_, AxisKind::energy_ev, label_).sorted_ascending();
}

Spectrum Spectrum::to_wavelength() const {
    if (kind_ == AxisKind::wavelength_nm) return sorted_ascending();
    std::vector<double> a(axis_.size());
    std::transform(axis_.begin(), axis_.end(), a.begin(),
                   [](double ev) { return PhysicalConstants::hc_ev_nm / ev; });
    return Spectrum(std::move(a), intensity_, AxisKind::wavelength_nm, label_).sorted_ascending();
}

Spectrum Spectrum::with_label(std::string label) const {
    Spectrum s = *this;
    s.label_ = std::move(label);
    return s;
}

bool Spectrum::covers(double lo, double hi) const {
    const double a = std::min(axis_.front(), axis_.back());
    const double b = std::max(axis_.front(), axis_.back());
    return lo >= a && hi <= b;
}

double Spectrum::interpolate(double x) const {
    const bool up = ascending();
    const double a = up ? axis_.front() : axis_.back();
    const double b = up ? axis_.back() : axis_.front();
    if (x < a || x > b) throw ShapeError("interpolation point outside axis range", std::to_string(x));
    if (axis_.size() == 1) return intensity_[0];
    // index of first sample not "before" x
    std::size_t hi = 0;
    if (up) {
        hi = static_cast<std::size_t>(std::lower_bound(axis_.begin(), axis_.end(), x) - axis_.begin());
    } else {
        hi = static_cast<std::size_t>(
            std::lower_bound(axis_.begin(), axis_.end(), x, [](double e, double v) { return e > v; }) -
            axis_.begin());
    }
    if (hi == 0) return intensity_[0];
    if (hi >= axis_.size()) return intensity_.back();
    const std::size_t lo = hi - 1;
    const double t = (x - axis_[lo]) / (axis_[hi] - axis_[lo]);
    return intensity_[lo] + t * (intensity_[hi] - intensity_[lo]);
}

Spectrum relative_reflectance(const Spectrum& cbr, const Spectrum& reference) {
    std::vector<double> ref_values;
    if (reference.axis_kind() == cbr.axis_kind()) {
        if (reference.size() != cbr.size())
            throw ShapeError("spectra are sampled on different grids",
                             std::to_string(cbr.size()) + " vs " + std::to_string(reference.size()));
        for (std::size_t i = 0; i < cbr.size(); ++i) {
            const double a = cbr.axis()[i];
            const double b = reference.axis()[i];
            if (std::abs(a - b) > 1e-12 * std::max(std::abs(a), std::abs(b)))
                throw ShapeError("spectra are sampled on different grids", "index " + std::to_string(i));
        }
        ref_values.assign(reference.intensity().begin(), reference.intensity().end());
    } else {
        const Spectrum converted =
            cbr.axis_kind() == AxisKind::energy_ev ? reference.to_energy() : reference.to_wavelength();
        const double lo = std::min(cbr.axis().front(), cbr.axis().back());
        const double hi = std::max(cbr.axis().front(), cbr.axis().back());
        if (!converted.covers(lo, hi))
            throw ShapeError("reference does not cover the cbr axis range");
        ref_values.resize(cbr.size());
        for (std::size_t i = 0; i < cbr.size(); ++i) ref_values[i] = converted.interpolate(cbr.axis()[i]);
    }
    std::vector<double> ratio(cbr.size());
    for (std::size_t i = 0; i < cbr.size(); ++i) {
        if (!(ref_values[i] > 0.0))
            throw DivisionError("reference intensity is zero", "index " + std::to_string(i));
        ratio[i] = cbr.intensity()[i] / ref_values[i];
    }
    return Spectrum(std::vector<double>(cbr.axis().begin(), cbr.axis().end()), std::move(ratio),
                    cbr.axis_kind(), cbr.label());
}

PhotonEnergy tpe_laser_energy(PhotonEnergy exciton, double binding_energy_ev) {
    if (!(binding_energy_ev >= 0.0)) throw DomainError("binding energy must be non-negative");
    const double e = exciton.ev() - 0.5 * binding_energy_ev;
    if (!(e > 0.0)) throw DomainError("laser energy would be non-positive");
    return PhotonEnergy(e);
}

Spectrum parse_spectrum(std::istream& in, const std::string& source_name, const SpectrumFormat& format) {
    const io::CsvTable table = io::parse_csv(in, source_name);
    if (table.rows.empty()) throw ParseError("no data rows", source_name);

    AxisKind kind = AxisKind::wavelength_nm;
    if (format.axis_kind) {
        kind = *format.axis_kind;
    } else if (auto it = table.meta.find("axis"); it != table.meta.end()) {
        kind = axis_kind_from_string(it->second);
    } else if (!table.header.empty()) {
        const std::string& h = table.header.front();
        if (h.find("eV") != std::string::npos || h.find("energy") != std::string::npos)
            kind = AxisKind::energy_ev;
    }
    std::string label;
    if (auto it = table.meta.find("label"); it != table.meta.end()) label = it->second;

    std::vector<double> axis;
    std::vector<double> values;
    axis.reserve(table.rows.size());
    values.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::string where = source_name + ":" + std::to_string(table.line_numbers[r]);
        if (table.rows[r].size() != 2) throw ParseError("expected 2 columns", where);
        axis.push_back(table.number(r, 0));
        values.push_back(table.number(r, 1));
        if (!std::isfinite(values.back())) throw ValidationError("intensity is not finite", where);
    }
    return Spectrum(std::move(axis), std::move(values), kind, std::move(label)).sorted_ascending();
}

Spectrum load_spectrum(const std::string& path, const SpectrumFormat& format) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file", path);
    return parse_spectrum(in, path, format);
}

void write_spectrum(std::ostream& out, const Spectrum& s) {
    out << "# axis=" << to_string(s.axis_kind()) << " label=" << s.label() << "\n";
    out << "axis,intensity\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        out << io::format_double(s.axis()[i]) << "," << io::format_double(s.intensity()[i]) << "\n";
}

}  // namespace cbr::spectra
