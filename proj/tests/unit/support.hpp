#pragma once

#include "afc/hyperfine.hpp"
#include "afc/lindblad.hpp"

namespace afc::test {

// Ion with the reference Euler angles and literature level spacings.
inline lindblad::IonModel reference_ion()
{
    const auto ops = hyperfine::build_spin_operators();
    const auto g = hyperfine::make_manifold({10.19, 17.30}, ops);
    const auto e = hyperfine::make_manifold({4.58, 4.84}, ops);
    hyperfine::EulerAngles a;
    a.alpha = 10.3;
    a.beta = -164.4;
    a.gamma = -130.7;
    lindblad::IonModel ion;
    ion.ground_mhz = hyperfine::energies_from_spacings({10.19, 17.30});
    ion.excited_mhz = hyperfine::energies_from_spacings({4.58, 4.84});
    ion.amplitudes = hyperfine::transition_amplitudes(g, e, a, hyperfine::AmplitudeModel::PrincipalAxis, ops);
    ion.relax.branching = ion.amplitudes.cwiseAbs2();
    return ion;
}

} // namespace afc::test
