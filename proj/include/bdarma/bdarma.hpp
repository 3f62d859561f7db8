#pragma once

// Everything except fetch.hpp, which needs OpenSSL at link time.

#include "bdarma/config.hpp"
#include "bdarma/darma.hpp"
#include "bdarma/diagnostics.hpp"
#include "bdarma/dirichlet.hpp"
#include "bdarma/forecast.hpp"
#include "bdarma/harness.hpp"
#include "bdarma/inference.hpp"
#include "bdarma/ingest.hpp"
#include "bdarma/io.hpp"
#include "bdarma/simplex.hpp"
#include "bdarma/synthetic.hpp"
