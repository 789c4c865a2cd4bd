#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskprof/error.hpp"
#include "riskprof/return_model.hpp"

namespace riskprof {

struct NamedStock {
    std::string name;
    MarginalDistribution dist;
    /// Probabilities exactly as read (numbers or decimal strings), kept for round trips.
    nlohmann::json raw_probs;
};

struct Instance {
    ReturnGrid grid;
    std::vector<NamedStock> stocks;

    std::vector<MarginalDistribution> marginals() const;
};

/// A validation failure tied to one stock of an instance.
class InstanceError : public Error {
public:
    InstanceError(ErrorCode code, const std::string& what, std::string stock, std::optional<double> deviation)
        : Error(code, what), stock_(std::move(stock)), deviation_(deviation) {}

    const std::string& stock() const { return stock_; }
    std::optional<double> deviation() const { return deviation_; }

private:
    std::string stock_;
    std::optional<double> deviation_;
};

/// Schema: {"mu": number, "m1": int, "m2": int, "stocks": [{"name": string,
/// "probs": [number or decimal string, ...]}]}. Every stock is validated.
Instance parse_instance(const nlohmann::json& doc, const ValidationOptions& options = {});
Instance parse_instance_text(const std::string& text, const ValidationOptions& options = {});
nlohmann::json instance_to_json(const Instance& instance);

struct PriceRow {
    std::string date;
    std::string ticker;
    double price;
};

/// Header `date,ticker,price`, RFC 4180 quoting.
std::vector<PriceRow> parse_price_csv(const std::string& text);

struct IngestResult {
    Instance instance;
    std::vector<std::string> warnings;
};

/// Non-overlapping returns over `period` observations, as end/start in
/// percent, clamped into the grid and rounded to the nearest level with ties
/// going down. Tickers keep their order of first appearance.
IngestResult ingest_prices(const std::vector<PriceRow>& rows, int period, const ReturnGrid& grid);

/// Level for a return in percent: ceil(r / mu - 1/2).
int round_to_level(double return_pct, const ReturnGrid& grid);

}  // namespace riskprof
