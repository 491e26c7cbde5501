#pragma once

#include "assemble.hpp"
#include "binio.hpp"
#include "core.hpp"
#include "deim.hpp"
#include "fom.hpp"
#include "manufactured.hpp"
#include "mesh.hpp"
#include "pod.hpp"
#include "quadrature.hpp"
#include "rom.hpp"
#include "space.hpp"
#include "stab.hpp"
#include "study.hpp"
