// Runs every acceptance criterion at its stated tolerance and time limit and
// prints one PASS/FAIL line per criterion. Criterion ids on the command line
// restrict the run.
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "lowbit/repro.hpp"

int main(int argc, char** argv) {
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i) {
        ids.push_back(std::atoi(argv[i]));
    }
    if (ids.empty()) {
        for (int id = 1; id <= lowbit::kCriterionCount; ++id) {
            ids.push_back(id);
        }
    }
    int failed = 0;
    for (int id : ids) {
        try {
            const auto result = lowbit::run_criterion(id);
            std::cout << lowbit::summary_line(result) << std::endl;
            failed += result.passed() ? 0 : 1;
        } catch (const std::exception& e) {
            std::cout << "[FAIL] " << id << ": " << e.what() << std::endl;
            ++failed;
        }
    }
    std::cout << (ids.size() - static_cast<std::size_t>(failed)) << "/" << ids.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
