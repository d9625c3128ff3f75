#include "geomfilter/acceptance.hpp"

#include <cstdio>

int main() {
    const int threads = geomfilter::default_threads();
    std::printf("acceptance suite (threads=%d)\n", threads);
    const auto results = geomfilter::acceptance::run_all(threads);
    return geomfilter::acceptance::print_and_summarize(results);
}
