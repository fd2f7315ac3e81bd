#include "gwsmooth/simulate.hpp"

namespace gwsmooth {

// The fixed 29-well layout used by scenarios 1 and 3, in unit-square
// coordinates. Two clusters with an empty central corridor: the simulated
// plume transits the corridor unobserved, which is what provokes ballooning
// under weak penalties. A copy is committed as data/scenario1_wells.csv; a
// test keeps the two in sync.
const std::array<std::pair<double, double>, 29>& scenario1_wells() {
    static const std::array<std::pair<double, double>, 29> wells = {{
        // west cluster
        {0.06, 0.22},
        {0.10, 0.45},
        {0.08, 0.68},
        {0.14, 0.30},
        {0.16, 0.58},
        {0.20, 0.14},
        {0.22, 0.40},
        {0.21, 0.72},
        {0.26, 0.26},
        {0.28, 0.55},
        {0.30, 0.80},
        {0.33, 0.38},
        {0.34, 0.62},
        // east cluster
        {0.68, 0.30},
        {0.70, 0.62},
        {0.74, 0.16},
        {0.76, 0.45},
        {0.79, 0.76},
        {0.83, 0.28},
        {0.85, 0.56},
        {0.88, 0.84},
        {0.91, 0.40},
        {0.94, 0.65},
        // boundary wells that keep the corridor inside the hull
        {0.18, 0.94},
        {0.50, 0.96},
        {0.80, 0.95},
        {0.22, 0.05},
        {0.52, 0.04},
        {0.78, 0.06},
    }};
    return wells;
}

}  // namespace gwsmooth
