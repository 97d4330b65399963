#include "geolex/error.hpp"

namespace geolex {

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::validation: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::numerical: return 3;
    }
    return 2;
}

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::data: return "data";
    case ErrorKind::numerical: return "numerical";
    }
    return "unknown";
}

}  // namespace geolex
