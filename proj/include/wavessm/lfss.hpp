#pragma once

#include <cstddef>

#include "wavessm/autodiff.hpp"
#include "wavessm/params.hpp"

namespace wavessm {

// Low-frequency state-space block.
//
//   vssm(x)  = out_linear( LN(ssm2d(SiLU(dw_conv(in_linear(x))))) * SiLU(gate_linear(x)) )
//   gffn(x)  = out( GELU(F1) * F2 ),  [F1, F2] = split(dw(expand(LN(x))))
//   block(x) : Z = vssm(LN(x)) + beta * x;  out = gffn(Z) + gamma * Z
//
// "Linear" layers are 1x1 convolutions. The inner width of the VSSM is
// expansion * channels; the GFFN expands to 2 * channels and gates back.

template <class T>
void init_vssm(ParamInit<T> init, std::size_t channels, std::size_t expansion, std::size_t state_size);
template <class T>
ad::Var<T> vssm(const ad::Var<T>& x, const Scope<T>& w);

template <class T>
void init_gffn(ParamInit<T> init, std::size_t channels);
template <class T>
ad::Var<T> gffn(const ad::Var<T>& x, const Scope<T>& w);

template <class T>
void init_lfss_block(ParamInit<T> init, std::size_t channels, std::size_t expansion, std::size_t state_size);
template <class T>
ad::Var<T> lfss_block(const ad::Var<T>& x, const Scope<T>& w);

}  // namespace wavessm
