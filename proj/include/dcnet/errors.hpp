#pragma once

#include <stdexcept>
#include <string>

namespace dcnet {

// Base class for all library errors. `code()` is a stable machine-readable
// slug; `what()` carries the human message.
class error : public std::runtime_error {
public:
    error(std::string code, const std::string& msg)
        : std::runtime_error(msg), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class degenerate_input_error : public error {
public:
    explicit degenerate_input_error(const std::string& msg)
        : error("degenerate-input", msg) {}
};

class invalid_covariance_error : public error {
public:
    explicit invalid_covariance_error(const std::string& msg)
        : error("invalid-covariance", msg) {}
};

class configuration_error : public error {
public:
    explicit configuration_error(const std::string& msg)
        : error("configuration", msg) {}
};

class degenerate_batch_error : public error {
public:
    explicit degenerate_batch_error(const std::string& msg)
        : error("degenerate-batch", msg) {}
};

class capacity_exhausted_error : public error {
public:
    explicit capacity_exhausted_error(const std::string& msg)
        : error("capacity-exhausted", msg) {}
};

// Basis generation could not reach the configured cosine target.
class generation_failure : public error {
public:
    generation_failure(const std::string& msg, double achieved_worst_cosine)
        : error("generation-failure", msg), worst_cosine_(achieved_worst_cosine) {}
    double worst_cosine() const noexcept { return worst_cosine_; }

private:
    double worst_cosine_;
};

class checkpoint_error : public error {
public:
    explicit checkpoint_error(const std::string& msg)
        : error("checkpoint", msg) {}
};

class missing_artifact_error : public error {
public:
    explicit missing_artifact_error(const std::string& msg)
        : error("missing-artifact", msg) {}
};

class evaluation_error : public error {
public:
    explicit evaluation_error(const std::string& msg)
        : error("evaluation", msg) {}
};

class precondition_error : public error {
public:
    explicit precondition_error(const std::string& msg)
        : error("precondition", msg) {}
};

}  // namespace dcnet
