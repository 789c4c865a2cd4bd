#include "riskprof/instance_io.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace riskprof {

using nlohmann::json;

std::vector<MarginalDistribution> Instance::marginals() const {
    std::vector<MarginalDistribution> out;
    out.reserve(stocks.size());
    for (const auto& s : stocks) out.push_back(s.dist);
    return out;
}

namespace {

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

double parse_probability(const json& v, const std::string& stock) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        std::size_t used = 0;
        double out = 0.0;
        try {
            out = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) parse_fail("stock " + stock + ": bad probability string '" + s + "'");
        return out;
    }
    parse_fail("stock " + stock + ": probabilities must be numbers or decimal strings");
}

}  // namespace

Instance parse_instance(const json& doc, const ValidationOptions& options) {
    if (!doc.is_object()) parse_fail("instance must be a JSON object");
    for (const char* key : {"mu", "m1", "m2", "stocks"})
        if (!doc.contains(key)) parse_fail(std::string("instance is missing '") + key + "'");
    if (!doc["mu"].is_number() || !doc["m1"].is_number_integer() || !doc["m2"].is_number_integer())
        parse_fail("mu must be a number and m1, m2 integers");
    if (!doc["stocks"].is_array()) parse_fail("'stocks' must be an array");

    Instance inst;
    inst.grid = ReturnGrid(doc["mu"].get<double>(), doc["m1"].get<int>(), doc["m2"].get<int>());
    std::size_t index = 0;
    for (const auto& s : doc["stocks"]) {
        if (!s.is_object() || !s.contains("probs") || !s["probs"].is_array())
            parse_fail("stock " + std::to_string(index) + " needs a 'probs' array");
        NamedStock stock;
        stock.name = s.contains("name") && s["name"].is_string() ? s["name"].get<std::string>()
                                                                 : "stock" + std::to_string(index);
        stock.raw_probs = s["probs"];
        Eigen::VectorXd probs(static_cast<Eigen::Index>(s["probs"].size()));
        for (std::size_t i = 0; i < s["probs"].size(); ++i)
            probs[static_cast<Eigen::Index>(i)] = parse_probability(s["probs"][i], stock.name);
        try {
            stock.dist = make_marginal(inst.grid, probs, options);
        } catch (const Error& e) {
            std::optional<double> deviation;
            if (e.code() == ErrorCode::SumNotOne) deviation = probs.sum() - 1.0;
            throw InstanceError(e.code(), "stock " + stock.name + ": " + e.what(), stock.name, deviation);
        }
        inst.stocks.push_back(std::move(stock));
        ++index;
    }
    if (inst.stocks.empty()) parse_fail("instance has no stocks");
    return inst;
}

Instance parse_instance_text(const std::string& text, const ValidationOptions& options) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        parse_fail(std::string("invalid JSON: ") + e.what());
    }
    return parse_instance(doc, options);
}

json instance_to_json(const Instance& instance) {
    json doc;
    doc["mu"] = instance.grid.mu;
    doc["m1"] = instance.grid.m1;
    doc["m2"] = instance.grid.m2;
    doc["stocks"] = json::array();
    for (const auto& s : instance.stocks) {
        json probs = s.raw_probs;
        if (!probs.is_array() || probs.size() != static_cast<std::size_t>(s.dist.probs.size())) {
            probs = json::array();
            for (Eigen::Index i = 0; i < s.dist.probs.size(); ++i) probs.push_back(s.dist.probs[i]);
        }
        doc["stocks"].push_back({{"name", s.name}, {"probs", probs}});
    }
    return doc;
}

std::vector<PriceRow> parse_price_csv(const std::string& text) {
    // Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF.
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        if (ch == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (ch == ',') {
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (ch == '\n' || ch == '\r') {
            if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
            if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
            record.clear();
        } else {
            field += ch;
            field_started = true;
        }
    }
    if (quoted) parse_fail("unterminated quoted field in prices CSV");
    if (field_started || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }

    if (records.empty()) parse_fail("prices CSV is empty");
    const auto& header = records.front();
    if (header != std::vector<std::string>{"date", "ticker", "price"})
        parse_fail("prices CSV header must be date,ticker,price");

    std::vector<PriceRow> rows;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != 3) parse_fail("prices CSV line " + std::to_string(r + 1) + " needs three fields");
        std::size_t used = 0;
        double price = 0.0;
        try {
            price = std::stod(rec[2], &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != rec[2].size())
            parse_fail("prices CSV line " + std::to_string(r + 1) + ": bad price '" + rec[2] + "'");
        rows.push_back({rec[0], rec[1], price});
    }
    return rows;
}

int round_to_level(double return_pct, const ReturnGrid& grid) {
    return static_cast<int>(std::ceil(return_pct / grid.mu - 0.5));
}

IngestResult ingest_prices(const std::vector<PriceRow>& rows, int period, const ReturnGrid& grid) {
    if (period < 1) throw Error(ErrorCode::InsufficientData, "period must be at least one observation");
    std::vector<std::string> order;
    std::map<std::string, std::vector<const PriceRow*>> series;
    for (const auto& row : rows) {
        if (!(row.price > 0.0))
            throw Error(ErrorCode::NonPositivePrice, row.ticker + " has price " + std::to_string(row.price) +
                                                         " on " + row.date);
        auto& s = series[row.ticker];
        if (s.empty()) order.push_back(row.ticker);
        if (!s.empty() && !(s.back()->date < row.date))
            throw Error(ErrorCode::ParseError, row.ticker + ": dates must be strictly increasing at " + row.date);
        s.push_back(&row);
    }
    if (order.empty()) throw Error(ErrorCode::InsufficientData, "no price observations");

    IngestResult out;
    out.instance.grid = grid;
    for (const auto& ticker : order) {
        const auto& s = series[ticker];
        const std::size_t periods = (s.size() - 1) / static_cast<std::size_t>(period);
        if (s.size() < 2 || periods == 0)
            throw Error(ErrorCode::InsufficientData, ticker + " has too few observations for one period");
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(grid.size());
        for (std::size_t p = 0; p < periods; ++p) {
            const PriceRow* start = s[p * static_cast<std::size_t>(period)];
            const PriceRow* end = s[(p + 1) * static_cast<std::size_t>(period)];
            double r = end->price / start->price * 100.0;
            if (r < grid.lowest() || r > grid.highest()) {
                std::ostringstream msg;
                msg << ticker << ": return " << r << "% from " << start->date << " to " << end->date
                    << " clamped into [" << grid.lowest() << ", " << grid.highest() << "]";
                out.warnings.push_back(msg.str());
                r = std::clamp(r, grid.lowest(), grid.highest());
            }
            const int level = std::clamp(round_to_level(r, grid), grid.m1, grid.m2);
            counts[level - grid.m1] += 1.0;
        }
        NamedStock stock;
        stock.name = ticker;
        stock.dist = make_marginal(grid, counts / static_cast<double>(periods));
        stock.raw_probs = json::array();
        for (Eigen::Index i = 0; i < stock.dist.probs.size(); ++i) stock.raw_probs.push_back(stock.dist.probs[i]);
        out.instance.stocks.push_back(std::move(stock));
    }
    return out;
}

}  // namespace riskprof
