#pragma once

namespace cbr {

// CODATA values; every module reads constants from here.
struct PhysicalConstants {
    static constexpr double hc_ev_nm = 1239.84198;       // eV nm
    static constexpr double hbar_ev_s = 6.582119569e-16;  // eV s
    static constexpr double c_m_s = 299792458.0;          // m/s
    static constexpr double mu0 = 1.25663706212e-6;       // H/m
    static constexpr double eps0 = 8.8541878128e-12;      // F/m
    static constexpr double pi = 3.14159265358979323846;
};

}  // namespace cbr
