#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlc {

using cdouble = std::complex<double>;
using CVector = std::vector<cdouble>;
using Bits = std::vector<std::uint8_t>;

// Errors carry a short category so callers (and the CLI) can report which
// contract was violated without string matching on the message.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(category + ": " + what), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

inline void require(bool cond, const char* category, const std::string& what)
{
    if (!cond) throw Error(category, what);
}

} // namespace nlc
