#pragma once

#include "rangekit/campaign.hpp"
#include "rangekit/channel.hpp"
#include "rangekit/pke.hpp"
#include "rangekit/ranging.hpp"
#include "rangekit/rng.hpp"
#include "rangekit/stats.hpp"
#include "rangekit/sts.hpp"
#include "rangekit/zip.hpp"
