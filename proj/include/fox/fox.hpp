#pragma once

#include "fox/address.hpp"
#include "fox/cache.hpp"
#include "fox/config.hpp"
#include "fox/error.hpp"
#include "fox/kernel_shim.hpp"
#include "fox/log_store.hpp"
#include "fox/mem_controller.hpp"
#include "fox/metrics.hpp"
#include "fox/omft.hpp"
#include "fox/provenance.hpp"
#include "fox/scheme.hpp"
#include "fox/workload.hpp"
