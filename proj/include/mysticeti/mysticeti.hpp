#pragma once

#include "mysticeti/bytes.hpp"
#include "mysticeti/checker.hpp"
#include "mysticeti/committer.hpp"
#include "mysticeti/config.hpp"
#include "mysticeti/crypto.hpp"
#include "mysticeti/dag.hpp"
#include "mysticeti/export.hpp"
#include "mysticeti/fastpath.hpp"
#include "mysticeti/fuzz.hpp"
#include "mysticeti/scenario.hpp"
#include "mysticeti/simulator.hpp"
#include "mysticeti/types.hpp"
#include "mysticeti/validator.hpp"
#include "mysticeti/wal.hpp"
