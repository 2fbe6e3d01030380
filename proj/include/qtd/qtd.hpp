#pragma once

#include "qtd/adjacency_lab.hpp"
#include "qtd/binary_state.hpp"
#include "qtd/error.hpp"
#include "qtd/hypercube_chain.hpp"
#include "qtd/io.hpp"
#include "qtd/metrics.hpp"
#include "qtd/quadrature.hpp"
#include "qtd/quantizer.hpp"
#include "qtd/reverse_sampler.hpp"
#include "qtd/rng.hpp"
#include "qtd/score_oracle.hpp"
#include "qtd/targets.hpp"
#include "qtd/verification.hpp"
