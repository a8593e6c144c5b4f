#ifndef FIBWALK_FIBWALK_HPP
#define FIBWALK_FIBWALK_HPP

#include "fibwalk/combinatorics.hpp"
#include "fibwalk/distortion.hpp"
#include "fibwalk/fib_map.hpp"
#include "fibwalk/induced.hpp"
#include "fibwalk/interval.hpp"
#include "fibwalk/nest.hpp"
#include "fibwalk/real.hpp"
#include "fibwalk/scaling.hpp"
#include "fibwalk/walk.hpp"

#endif  // FIBWALK_FIBWALK_HPP
