#pragma once

#include "slkato/common.hpp"
#include "slkato/domain.hpp"
#include "slkato/families.hpp"
#include "slkato/formbounds.hpp"
#include "slkato/io.hpp"
#include "slkato/kato.hpp"
#include "slkato/krein.hpp"
#include "slkato/matfun.hpp"
#include "slkato/mesh.hpp"
#include "slkato/sectorial.hpp"
#include "slkato/suites.hpp"
