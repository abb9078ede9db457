#pragma once

#include "riskshare/error.hpp"
#include "riskshare/scenario.hpp"
#include "riskshare/linalg.hpp"
#include "riskshare/linprog.hpp"
#include "riskshare/numeric.hpp"
#include "riskshare/measures.hpp"
#include "riskshare/securitize.hpp"
#include "riskshare/regime.hpp"
#include "riskshare/market.hpp"
#include "riskshare/lawinv.hpp"
#include "riskshare/sharing.hpp"
#include "riskshare/equilibrium.hpp"
#include "riskshare/splits.hpp"
#include "riskshare/oracle.hpp"
