#pragma once

#include "structsr/config.hpp"
#include "structsr/degrade.hpp"
#include "structsr/diffusion.hpp"
#include "structsr/errors.hpp"
#include "structsr/harness.hpp"
#include "structsr/image.hpp"
#include "structsr/image_io.hpp"
#include "structsr/jpeg.hpp"
#include "structsr/metrics.hpp"
#include "structsr/resample.hpp"
#include "structsr/structsr.hpp"
#include "structsr/synthetic.hpp"
