// SPDX-License-Identifier: MIT
#pragma once

// Umbrella header: registration of implicit signed-distance fields by
// similarity-transform optimization, with automated coarse initialization
// and an experiment harness.

#include <sdfreg/bench.hpp>
#include <sdfreg/coarse_init.hpp>
#include <sdfreg/field.hpp>
#include <sdfreg/fpfh.hpp>
#include <sdfreg/grid.hpp>
#include <sdfreg/kdtree.hpp>
#include <sdfreg/parallel.hpp>
#include <sdfreg/point_set.hpp>
#include <sdfreg/registration.hpp>
#include <sdfreg/render.hpp>
#include <sdfreg/rng.hpp>
#include <sdfreg/robust_kernel.hpp>
#include <sdfreg/sampling.hpp>
#include <sdfreg/scene.hpp>
#include <sdfreg/substitution.hpp>
#include <sdfreg/transform.hpp>
