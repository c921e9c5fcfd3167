#pragma once

// Everything except file I/O (kamtori/io.hpp, which needs OpenSSL).

#include "kamtori/errors.hpp"
#include "kamtori/spectral.hpp"
#include "kamtori/smalldiv.hpp"
#include "kamtori/fields.hpp"
#include "kamtori/embedding.hpp"
#include "kamtori/torus_geom.hpp"
#include "kamtori/kam.hpp"
#include "kamtori/hj.hpp"
#include "kamtori/ck_extend.hpp"
#include "kamtori/equilibria.hpp"
