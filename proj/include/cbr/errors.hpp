#pragma once

#include <stdexcept>
#include <string>

namespace cbr {

// Broad classes used by the CLI to choose an exit code.
enum class ErrorClass { input, computation, internal };

class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message, std::string context = {})
        : std::runtime_error(message), code_(std::move(code)), context_(std::move(context)) {}

    const std::string& code() const noexcept { return code_; }
    const std::string& context() const noexcept { return context_; }
    virtual ErrorClass error_class() const noexcept { return ErrorClass::computation; }

private:
    std::string code_;
    std::string context_;
};

#define CBR_DEFINE_ERROR(Name, code_str, klass)                                        \
    class Name : public Error {                                                        \
    public:                                                                            \
        explicit Name(const std::string& message, std::string context = {})            \
            : Error(code_str, message, std::move(context)) {}                          \
        ErrorClass error_class() const noexcept override { return ErrorClass::klass; } \
    };

CBR_DEFINE_ERROR(DomainError, "domain_error", input)
CBR_DEFINE_ERROR(ShapeError, "shape_error", input)
CBR_DEFINE_ERROR(ParseError, "parse_error", input)
CBR_DEFINE_ERROR(ValidationError, "validation_error", input)
CBR_DEFINE_ERROR(DataError, "data_error", input)
CBR_DEFINE_ERROR(ParameterError, "parameter_error", input)
CBR_DEFINE_ERROR(DivisionError, "division_error", computation)
CBR_DEFINE_ERROR(RankDeficientError, "rank_deficient", computation)
CBR_DEFINE_ERROR(FitError, "fit_error", computation)
CBR_DEFINE_ERROR(InitError, "init_error", computation)
CBR_DEFINE_ERROR(StateError, "state_error", computation)
CBR_DEFINE_ERROR(NormalizationError, "normalization_error", computation)
CBR_DEFINE_ERROR(DetectionError, "detection_error", computation)
CBR_DEFINE_ERROR(ModelError, "model_error", computation)
CBR_DEFINE_ERROR(PlanningError, "planning_error", computation)
CBR_DEFINE_ERROR(StabilityError, "stability_error", computation)
CBR_DEFINE_ERROR(TransformError, "transform_error", computation)
CBR_DEFINE_ERROR(PartialResultError, "partial_result", computation)

#undef CBR_DEFINE_ERROR

}  // namespace cbr
