#pragma once

// Umbrella header: the whole library.

#include "escp/cli.hpp"
#include "escp/density.hpp"
#include "escp/dpdp.hpp"
#include "escp/error.hpp"
#include "escp/geometry.hpp"
#include "escp/instance.hpp"
#include "escp/json_io.hpp"
#include "escp/matching.hpp"
#include "escp/permutation.hpp"
#include "escp/randmatch.hpp"
#include "escp/rng.hpp"
#include "escp/scp.hpp"
#include "escp/transport.hpp"
