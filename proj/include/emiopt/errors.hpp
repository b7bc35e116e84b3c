// SPDX-License-Identifier: Apache-2.0
//
// emiopt: transmit covariance optimization for frequency-selective MIMO channels
// Copyright (C) 2026 The emiopt authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef EMIOPT_ERRORS_HPP
#define EMIOPT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace emiopt
{

// Base for every error raised by the library.
class error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class invalid_input : public error
{
public:
    using error::error;
};

// Fixed-point iteration hit its iteration cap. Carries the last sup-norm step.
class max_iterations_exceeded : public error
{
public:
    max_iterations_exceeded(const std::string &what, double last_residual)
        : error(what), last_residual_(last_residual) {}
    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

class non_finite : public error
{
public:
    using error::error;
};

// Resolvent matrix too badly conditioned to invert reliably.
class ill_conditioned : public error
{
public:
    using error::error;
};

class restart_exhausted : public error
{
public:
    using error::error;
};

class config_error : public error
{
public:
    using error::error;
};

class io_error : public error
{
public:
    using error::error;
};

} // namespace emiopt

#endif
