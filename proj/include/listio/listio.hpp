#pragma once

#include "listio/bench.hpp"
#include "listio/client.hpp"
#include "listio/error.hpp"
#include "listio/region.hpp"
#include "listio/server.hpp"
#include "listio/transport.hpp"
#include "listio/wire.hpp"
#include "listio/workloads.hpp"
