#include <cmath>
#include <sstream>

#include "doctest.h"

#include "cbr/errors.hpp"
#include "cbr/lineshapes.hpp"
#include "cbr/spectra.hpp"

using namespace cbr;
using namespace cbr::spectra;

TEST_CASE("nm_to_ev reference values") {
    CHECK(nm_to_ev(784.0).ev() == doctest::Approx(1.5814).epsilon(1e-4));
    CHECK(nm_to_ev(800.0).ev() == doctest::Approx(1239.84198 / 800.0).epsilon(1e-14));
    CHECK_THROWS_AS(nm_to_ev(0.0), DomainError);
    CHECK_THROWS_AS(nm_to_ev(-3.0), DomainError);
    CHECK_THROWS_AS(PhotonEnergy(0.0), DomainError);
}

TEST_CASE("unit round trip over 400-1600 nm") {
    for (int i = 0; i <= 1200; ++i) {
        const double nm = 400.0 + i;
        const double back = ev_to_nm(nm_to_ev(nm));
        CHECK(std::abs(back - nm) <= 1e-9);
        CHECK(std::abs(back - nm) / nm <= 1e-12);
    }
}

TEST_CASE("tpe laser energy") {
    CHECK(tpe_laser_energy(PhotonEnergy(1.581), 3.8e-3).ev() == doctest::Approx(1.5791).epsilon(1e-12));
    CHECK(tpe_laser_energy(PhotonEnergy(1.600), 4.0e-3).ev() == doctest::Approx(1.5980).epsilon(1e-12));
    CHECK(tpe_laser_energy(PhotonEnergy(1.581), 0.0).ev() == 1.581);
    CHECK_THROWS_AS(tpe_laser_energy(PhotonEnergy(0.001), 0.01), DomainError);
    CHECK_THROWS_AS(tpe_laser_energy(PhotonEnergy(1.5), -0.01), DomainError);
    // linear in both arguments
    const double a = tpe_laser_energy(PhotonEnergy(1.5), 0.002).ev();
    const double b = tpe_laser_energy(PhotonEnergy(1.6), 0.006).ev();
    const double mid = tpe_laser_energy(PhotonEnergy(1.55), 0.004).ev();
    CHECK(mid == doctest::Approx(0.5 * (a + b)).epsilon(1e-14));
}

TEST_CASE("spectrum validation") {
    CHECK_THROWS_AS(Spectrum({1, 2, 2}, {1, 1, 1}, AxisKind::energy_ev), ValidationError);
    CHECK_THROWS_AS(Spectrum({1, 3, 2}, {1, 1, 1}, AxisKind::energy_ev), ValidationError);
    CHECK_THROWS_AS(Spectrum({1, 2}, {1, 1, 1}, AxisKind::energy_ev), ShapeError);
    CHECK_THROWS_AS(Spectrum({1, 2}, {1, NAN}, AxisKind::energy_ev), ValidationError);
    CHECK_NOTHROW(Spectrum({3, 2, 1}, {1, 2, 3}, AxisKind::energy_ev));
}

TEST_CASE("relative reflectance") {
    std::vector<double> e, v;
    for (int i = 0; i < 200; ++i) {
        e.push_back(1.45 + 0.00125 * i);
        v.push_back(0.3 + 0.2 * std::sin(7.0 * e.back()));
    }
    const Spectrum ref(e, v, AxisKind::energy_ev);
    SUBCASE("identity") {
        const Spectrum r = relative_reflectance(ref, ref);
        for (double x : r.intensity()) CHECK(x == 1.0);
    }
    SUBCASE("recovers a Fano dip") {
        lineshapes::FanoParams fp{0.5, 0.4, 0.8, 1.55, 0.01};
        std::vector<double> c(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) c[i] = lineshapes::fano_value(e[i], fp) * v[i];
        const Spectrum r = relative_reflectance(Spectrum(e, c, AxisKind::energy_ev), ref);
        for (std::size_t i = 0; i < v.size(); ++i)
            CHECK(r.intensity()[i] == doctest::Approx(lineshapes::fano_value(e[i], fp)).epsilon(1e-13));
    }
    SUBCASE("zero reference") {
        auto z = v;
        z[17] = 0.0;
        try {
            relative_reflectance(ref, Spectrum(e, z, AxisKind::energy_ev));
            FAIL("expected division error");
        } catch (const DivisionError& err) {
            CHECK(std::string(err.context()).find("17") != std::string::npos);
        }
    }
    SUBCASE("grid mismatch") {
        auto e2 = e;
        e2[3] += 1e-4;
        CHECK_THROWS_AS(relative_reflectance(ref, Spectrum(e2, v, AxisKind::energy_ev)), ShapeError);
        std::vector<double> e3(e.begin(), e.begin() + 100), v3(v.begin(), v.begin() + 100);
        CHECK_THROWS_AS(relative_reflectance(ref, Spectrum(e3, v3, AxisKind::energy_ev)), ShapeError);
    }
    SUBCASE("reference on a wavelength axis is resampled") {
        std::vector<double> nm, flat;
        for (int i = 0; i < 400; ++i) {
            nm.push_back(700.0 + 0.5 * i);
            flat.push_back(2.0);
        }
        const Spectrum r = relative_reflectance(ref, Spectrum(nm, flat, AxisKind::wavelength_nm));
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(r.intensity()[i] == doctest::Approx(v[i] / 2.0));
        std::vector<double> nm_short(nm.begin(), nm.begin() + 50), f_short(flat.begin(), flat.begin() + 50);
        CHECK_THROWS_AS(relative_reflectance(ref, Spectrum(nm_short, f_short, AxisKind::wavelength_nm)),
                        ShapeError);
    }
}

TEST_CASE("spectrum CSV ingestion") {
    SUBCASE("two-column file with header") {
        std::istringstream in("# axis=wavelength_nm label=RT d1\naxis,intensity\n780,0.5\n790,0.4\n800,0.6\n");
        const Spectrum s = parse_spectrum(in, "mem");
        CHECK(s.size() == 3);
        CHECK(s.axis_kind() == AxisKind::wavelength_nm);
        CHECK(s.label() == "RT d1");
    }
    SUBCASE("descending axis is returned ascending with pairing kept") {
        std::istringstream in("# axis=wavelength_nm\naxis,intensity\n800,3\n790,2\n780,1\n");
        const Spectrum s = parse_spectrum(in, "mem");
        CHECK(s.axis()[0] == 780.0);
        CHECK(s.intensity()[0] == 1.0);
        CHECK(s.axis()[2] == 800.0);
        CHECK(s.intensity()[2] == 3.0);
    }
    SUBCASE("NaN intensity") {
        std::istringstream in("# axis=energy_eV\naxis,intensity\n1.5,1\n1.6,nan\n");
        CHECK_THROWS_AS(parse_spectrum(in, "mem"), ValidationError);
    }
    SUBCASE("malformed row names the line") {
        std::istringstream in("# axis=energy_eV\naxis,intensity\n1.5,1\n1.6,abc\n");
        try {
            parse_spectrum(in, "mem");
            FAIL("expected parse error");
        } catch (const ParseError& err) {
            CHECK(std::string(err.context()).find(":4") != std::string::npos);
        }
    }
    SUBCASE("non-monotone axis") {
        std::istringstream in("# axis=energy_eV\naxis,intensity\n1.5,1\n1.7,1\n1.6,1\n");
        CHECK_THROWS_AS(parse_spectrum(in, "mem"), ValidationError);
    }
    SUBCASE("empty input") {
        std::istringstream in("");
        CHECK_THROWS_AS(parse_spectrum(in, "mem"), ParseError);
    }
    SUBCASE("write then read round trip") {
        const Spectrum s({1.5, 1.55, 1.6}, {0.25, 0.125, 1.0 / 3.0}, AxisKind::energy_ev, "x");
        std::ostringstream out;
        write_spectrum(out, s);
        std::istringstream in(out.str());
        const Spectrum r = parse_spectrum(in, "mem");
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(r.axis()[i] == s.axis()[i]);
            CHECK(r.intensity()[i] == s.intensity()[i]);
        }
    }
}
