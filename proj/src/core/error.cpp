#include "conncrack/error.hpp"

namespace conncrack {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Configuration: return "configuration error";
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Divergence: return "training divergence";
    }
    return "error";
}

} // namespace conncrack
