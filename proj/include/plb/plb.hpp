#pragma once

#include "plb/bounds.hpp"
#include "plb/csv.hpp"
#include "plb/error.hpp"
#include "plb/estimator.hpp"
#include "plb/fisher.hpp"
#include "plb/forward.hpp"
#include "plb/image.hpp"
#include "plb/parallel.hpp"
#include "plb/pfm.hpp"
#include "plb/render_error.hpp"
#include "plb/renderer.hpp"
#include "plb/rng.hpp"
#include "plb/scene.hpp"
#include "plb/scene_io.hpp"
#include "plb/stack.hpp"
#include "plb/synthetic.hpp"
#include "plb/vec3.hpp"
