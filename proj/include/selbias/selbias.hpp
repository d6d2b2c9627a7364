#ifndef SELBIAS_SELBIAS_HPP_
#define SELBIAS_SELBIAS_HPP_

#include "selbias/citest.hpp"
#include "selbias/dataset.hpp"
#include "selbias/enumerate.hpp"
#include "selbias/error.hpp"
#include "selbias/eval.hpp"
#include "selbias/graph.hpp"
#include "selbias/icp.hpp"
#include "selbias/parallel.hpp"
#include "selbias/patterns.hpp"
#include "selbias/randgraph.hpp"
#include "selbias/scm.hpp"
#include "selbias/separation.hpp"

#endif  // SELBIAS_SELBIAS_HPP_
