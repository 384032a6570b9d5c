#pragma once

#include "spherot/alpha.hpp"
#include "spherot/core.hpp"
#include "spherot/embedding.hpp"
#include "spherot/homology.hpp"
#include "spherot/kde.hpp"
#include "spherot/pipeline.hpp"
#include "spherot/sampler.hpp"
#include "spherot/sphere.hpp"
