#pragma once

#include <complex>
#include <vector>

namespace tinyshape {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;

}  // namespace tinyshape
