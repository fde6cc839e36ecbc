// Contaminate a Gaussian sample, fit a few estimators and print their bias measures.
#include <iostream>

#include <fmt/format.h>

#include "depthlab/deepest.hpp"
#include "depthlab/maxbias.hpp"
#include "depthlab/simlab.hpp"

int main() {
    using namespace depthlab;

    const Dataset data = gen_contaminated({2, 200, 0.1, 25.0, 42});

    fmt::print("maxbias of the deepest scatter at eps=0.1: {:.4f}\n", scatter_maxbias(0.1));
    fmt::print("Tukey median: ({:.3f}, {:.3f})\n", tukey_median(data)(0), tukey_median(data)(1));

    for (EstimatorId id : {EstimatorId::SCOV, EstimatorId::MCD, EstimatorId::MM, EstimatorId::MDEPTH}) {
        const auto rec = bias_measures(run_estimator(id, data, RngStream(42, 100)));
        fmt::print("{:<7} lambda1={:9.3f} lambdap={:6.3f} log b={:6.3f}\n", to_string(id), rec.lambda1, rec.lambdap,
                   std::log(rec.b));
    }
    return 0;
}
