#include "trace/constants.hpp"

namespace trace {

const ProtocolConstants& constants() noexcept {
    static const ProtocolConstants table{};
    return table;
}

}  // namespace trace
