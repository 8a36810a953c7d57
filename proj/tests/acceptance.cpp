#include <catch2/catch_amalgamated.hpp>
#include "grasp/generator.hpp"
#include "grasp/foot_refine.hpp"
#include "grasp/hand_refine.hpp"
#include "grasp/metrics.hpp"
TEST_CASE("placeholder acceptance") { SUCCEED(); }
