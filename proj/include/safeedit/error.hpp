/*
 Copyright 2026 The safeedit Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace safeedit {

// Error families. The numeric value doubles as the CLI exit code.
enum class ErrorFamily : int {
    config = 2,
    transport = 3,
    service = 4,
    fixture_missing = 5,
    protocol = 6,
    mask = 7,
    backend = 8,
    evaluation = 9,
    io = 10,
};

inline const char* family_name(ErrorFamily f)
{
    switch (f)
    {
    case ErrorFamily::config: return "config";
    case ErrorFamily::transport: return "transport";
    case ErrorFamily::service: return "service";
    case ErrorFamily::fixture_missing: return "fixture_missing";
    case ErrorFamily::protocol: return "protocol";
    case ErrorFamily::mask: return "mask";
    case ErrorFamily::backend: return "backend";
    case ErrorFamily::evaluation: return "evaluation";
    case ErrorFamily::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorFamily family, std::string kind, const std::string& message)
        : std::runtime_error(message)
        , m_family(family)
        , m_kind(std::move(kind))
    {
    }

    ErrorFamily family() const { return m_family; }
    // Short type tag, e.g. "MalformedBlock".
    const std::string& kind() const { return m_kind; }
    int exit_code() const { return static_cast<int>(m_family); }

    // Index of the detection / edit plan being processed when the error was
    // raised, attached by callers that loop over instances.
    const std::optional<std::size_t>& instance() const { return m_instance; }
    void set_instance(std::size_t i) { m_instance = i; }

private:
    ErrorFamily m_family;
    std::string m_kind;
    std::optional<std::size_t> m_instance;
};

class ConfigError : public Error
{
public:
    explicit ConfigError(const std::string& msg)
        : Error(ErrorFamily::config, "ConfigError", msg)
    {
    }
};

class IoError : public Error
{
public:
    explicit IoError(const std::string& msg)
        : Error(ErrorFamily::io, "IoError", msg)
    {
    }
};

// ---- detector protocol ------------------------------------------------------

class ProtocolError : public Error
{
public:
    explicit ProtocolError(const std::string& msg)
        : Error(ErrorFamily::protocol, "ProtocolError", msg)
    {
    }

protected:
    ProtocolError(std::string kind, const std::string& msg)
        : Error(ErrorFamily::protocol, std::move(kind), msg)
    {
    }
};

class MalformedBlock : public ProtocolError
{
public:
    MalformedBlock(std::size_t index, std::string field, const std::string& detail)
        : ProtocolError("MalformedBlock",
                        "block " + std::to_string(index) + ": expected field '" + field + "': " + detail)
        , m_index(index)
        , m_field(std::move(field))
    {
    }
    std::size_t index() const { return m_index; }
    const std::string& field() const { return m_field; }

private:
    std::size_t m_index;
    std::string m_field;
};

class MalformedBox : public ProtocolError
{
public:
    MalformedBox(std::size_t index, const std::string& text)
        : ProtocolError("MalformedBox",
                        "block " + std::to_string(index) + ": bounding box is not four integers: '" + text + "'")
        , m_index(index)
    {
    }
    std::size_t index() const { return m_index; }

private:
    std::size_t m_index;
};

class BoxRangeError : public ProtocolError
{
public:
    BoxRangeError(std::size_t index, const std::string& detail)
        : ProtocolError("BoxRangeError", "box " + std::to_string(index) + ": " + detail)
        , m_index(index)
    {
    }
    std::size_t index() const { return m_index; }

private:
    std::size_t m_index;
};

// ---- vlm client --------------------------------------------------------------

class TransportError : public Error
{
public:
    TransportError(const std::string& msg, int attempts)
        : Error(ErrorFamily::transport, "TransportError", msg)
        , m_attempts(attempts)
    {
    }
    int attempts() const { return m_attempts; }

private:
    int m_attempts;
};

class ServiceError : public Error
{
public:
    explicit ServiceError(int status)
        : Error(ErrorFamily::service, "ServiceError", "detector service returned HTTP " + std::to_string(status))
        , m_status(status)
    {
    }
    int status() const { return m_status; }

private:
    int m_status;
};

class FixtureMissing : public Error
{
public:
    explicit FixtureMissing(std::string digest)
        : Error(ErrorFamily::fixture_missing, "FixtureMissing", "no recorded exchange for digest " + digest)
        , m_digest(std::move(digest))
    {
    }
    const std::string& digest() const { return m_digest; }

private:
    std::string m_digest;
};

// ---- masks and solver ---------------------------------------------------------

class ShapeError : public Error
{
public:
    explicit ShapeError(const std::string& msg)
        : Error(ErrorFamily::mask, "ShapeError", msg)
    {
    }
};

class DegenerateAttention : public Error
{
public:
    explicit DegenerateAttention(const std::string& msg)
        : Error(ErrorFamily::mask, "DegenerateAttention", msg)
    {
    }
};

class SolverError : public Error
{
public:
    SolverError(double residual, std::size_t iterations)
        : Error(ErrorFamily::mask, "SolverError",
                "conjugate gradient did not converge after " + std::to_string(iterations) +
                    " iterations (relative residual " + std::to_string(residual) + ")")
        , m_residual(residual)
    {
    }
    double residual() const { return m_residual; }

private:
    double m_residual;
};

// ---- editing -------------------------------------------------------------------

class BackendError : public Error
{
public:
    BackendError(long step, const std::string& msg)
        : Error(ErrorFamily::backend, "BackendError",
                (step >= 0 ? "step " + std::to_string(step) + ": " : std::string{}) + msg)
        , m_step(step)
    {
    }
    // -1 when the failure is not tied to a step.
    long step() const { return m_step; }

private:
    long m_step;
};

class CapabilityError : public Error
{
public:
    explicit CapabilityError(const std::string& msg)
        : Error(ErrorFamily::backend, "CapabilityError", msg)
    {
    }
};

// ---- evaluation -----------------------------------------------------------------

class EmptyBackground : public Error
{
public:
    explicit EmptyBackground(const std::string& msg = "no background pixels remain after exclusion")
        : Error(ErrorFamily::evaluation, "EmptyBackground", msg)
    {
    }
};

class ProviderError : public Error
{
public:
    explicit ProviderError(const std::string& msg)
        : Error(ErrorFamily::evaluation, "ProviderError", msg)
    {
    }
};

class NoJudgments : public Error
{
public:
    explicit NoJudgments(const std::string& msg = "no judgments match the selection")
        : Error(ErrorFamily::evaluation, "NoJudgments", msg)
    {
    }
};

} // namespace safeedit
