#pragma once

#include <stdexcept>
#include <string>

namespace covopt {

/// Raised when an objective evaluation is requested after the budget is spent.
class BudgetExhausted : public std::runtime_error {
public:
    explicit BudgetExhausted(int budget)
        : std::runtime_error("evaluation budget of " + std::to_string(budget) +
                             " function evaluations is exhausted"),
          budget_(budget) {}

    int budget() const noexcept { return budget_; }

private:
    int budget_;
};

/// Raised for malformed or inconsistent data files (grids, instances, results).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}
