#include "thermalab/acceptance.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"thermalab acceptance checks"};
    thermalab::AcceptanceOptions opt;
    std::vector<int> only;
    bool verbose = false;
    app.add_option("--work-dir", opt.work_dir, "Directory for runs and caches")->required();
    app.add_option("--only", only, "Criterion ids to run");
    app.add_option("--workers", opt.workers, "Trajectory workers")->check(CLI::PositiveNumber);
    app.add_flag("-v,--verbose", verbose, "Log progress to stderr");
    CLI11_PARSE(app, argc, argv);
    opt.only.insert(only.begin(), only.end());
    if (verbose) opt.log = [](const std::string& s) { std::cerr << s << '\n'; };

    int failed = 0;
    const auto results = thermalab::run_acceptance(opt, [&](const thermalab::CriterionResult& r) {
        std::cout << thermalab::format_result(r) << std::endl;
        failed += !r.pass;
    });
    std::cout << results.size() - failed << "/" << results.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
