#include "oar/parallel.hpp"

#include <cstdlib>
#include <string>

namespace oar {

int default_thread_count(int fallback) {
    if (const char* env = std::getenv("OAR_EVALKIT_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    return std::max(1, fallback);
}

}  // namespace oar
