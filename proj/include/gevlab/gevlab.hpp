#pragma once

// Gevrey-regularity laboratory for defocusing dispersive equations:
// spectral transforms, weight families, modified energies and their fluxes,
// multiplier-defect sampling, frequency-restricted integrals, and the
// radius-extension bookkeeping built on top of them.

#include "gevlab/version.hpp"
#include "gevlab/rng.hpp"
#include "gevlab/fit.hpp"
#include "gevlab/parallel.hpp"
#include "gevlab/io.hpp"
#include "gevlab/spectral.hpp"
#include "gevlab/weights.hpp"
#include "gevlab/multiplier.hpp"
#include "gevlab/evolution.hpp"
#include "gevlab/extension.hpp"
#include "gevlab/fre.hpp"
#include "gevlab/verify.hpp"
