#pragma once

#include <stdexcept>
#include <string>

#include <gmpxx.h>

namespace thetaexp {

// Base of everything the library throws. `kind()` is a stable machine-readable
// tag used by the CLI error records.
class error : public std::runtime_error {
public:
    error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class domain_error : public error {
public:
    explicit domain_error(const std::string& what) : error("domain", what) {}
};

class parameter_error : public error {
public:
    explicit parameter_error(const std::string& what) : error("parameter", what) {}
};

class division_by_zero : public error {
public:
    explicit division_by_zero(const std::string& what) : error("division_by_zero", what) {}
};

class numerical_error : public error {
public:
    explicit numerical_error(const std::string& what) : error("numerical", what) {}
};

class config_error : public error {
public:
    explicit config_error(const std::string& what) : error("config", what) {}
};

class orbit_too_short : public error {
public:
    orbit_too_short(const std::string& what, std::size_t reached)
        : error("orbit_too_short", what), reached_(reached) {}

    // Number of steps completed before the orbit hit 0.
    std::size_t reached() const noexcept { return reached_; }

private:
    std::size_t reached_;
};

// Raised when an interval enclosure of 1/(theta x) still contains an integer
// at the precision cap.
class certification_error : public error {
public:
    certification_error(const std::string& what, mpz_class ambiguous, unsigned long precision)
        : error("certification", what), ambiguous_(std::move(ambiguous)), precision_(precision) {}

    const mpz_class& ambiguous_integer() const noexcept { return ambiguous_; }
    unsigned long precision() const noexcept { return precision_; }

private:
    mpz_class ambiguous_;
    unsigned long precision_;
};

class fit_error : public error {
public:
    explicit fit_error(const std::string& what) : error("fit", what) {}
};

}  // namespace thetaexp
