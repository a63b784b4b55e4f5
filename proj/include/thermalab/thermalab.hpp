#pragma once

#include "thermalab/errors.hpp"
#include "thermalab/io.hpp"
#include "thermalab/pauli.hpp"
#include "thermalab/basis.hpp"
#include "thermalab/sector_vector.hpp"
#include "thermalab/operators.hpp"
#include "thermalab/dense_eigen.hpp"
#include "thermalab/bloch.hpp"
#include "thermalab/observables.hpp"
#include "thermalab/krylov.hpp"
#include "thermalab/thermal.hpp"
#include "thermalab/analysis.hpp"
#include "thermalab/config.hpp"
#include "thermalab/runner.hpp"
#include "thermalab/svg.hpp"
#include "thermalab/acceptance.hpp"
