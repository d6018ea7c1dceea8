#pragma once

// Everything: core model, learning, environments and the experiment harness.
#include "netmarl/codec.hpp"
#include "netmarl/decay.hpp"
#include "netmarl/dynamics.hpp"
#include "netmarl/envs/sis.hpp"
#include "netmarl/envs/tabular.hpp"
#include "netmarl/envs/wireless.hpp"
#include "netmarl/graph.hpp"
#include "netmarl/harness/acceptance.hpp"
#include "netmarl/harness/config.hpp"
#include "netmarl/harness/experiment.hpp"
#include "netmarl/harness/fixtures.hpp"
#include "netmarl/harness/validate.hpp"
#include "netmarl/links.hpp"
#include "netmarl/markov.hpp"
#include "netmarl/mdp.hpp"
#include "netmarl/oracle.hpp"
#include "netmarl/policy.hpp"
#include "netmarl/rng.hpp"
#include "netmarl/sac.hpp"
#include "netmarl/stochapprox.hpp"
#include "netmarl/tdq.hpp"
