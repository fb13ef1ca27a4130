#ifndef SOPE_ERROR_HPP
#define SOPE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace sope {

/// Machine-readable failure categories. The CLI prints the category name and
/// maps it to a nonzero exit code.
enum class ErrorCode {
    InvalidArgument,
    SingularSystem,
    CannotCertify,
    NoFeasibleLength,
    ExponentCollision,
    DegenerateSelection,
    TailUnusable,
    Infeasible,
    SolverFailure,
    Parse,
    Io,
    MissingFixture,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorCode::InvalidArgument, what);
}

} // namespace sope

#endif
