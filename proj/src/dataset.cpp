// SPDX-License-Identifier: Apache-2.0
#include "georef/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "georef/util.hpp"

namespace georef {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view element_kind_name(ElementKind k) {
    static constexpr std::string_view names[] = {"segment", "line", "ray", "circle", "polygon"};
    return names[static_cast<int>(k)];
}

ElementKind element_kind_from_name(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(ElementKind::Polygon); ++i)
        if (element_kind_name(static_cast<ElementKind>(i)) == s) return static_cast<ElementKind>(i);
    throw std::invalid_argument("unknown element kind '" + std::string(s) + "'");
}

std::string meta_path(const std::string& path) { return path + ".meta.json"; }

}  // namespace

SchemaError::SchemaError(const std::string& msg, int line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}

// ---------------------------------------------------------------------------
// Items

ordered_json item_to_json(const QAItem& item) {
    ordered_json j;
    j["v"] = kSchemaVersion;
    j["id"] = item.id;
    j["image"] = item.image;
    j["category"] = category_name(item.category);
    j["question"] = item.question;
    j["answers"] = ordered_json{{"canonical", item.answers.canonical}, {"variants", item.answers.variants}};
    j["steps"] = item.steps;
    j["fact_kind"] = fact_kind_name(item.fact_kind);
    j["template_id"] = item.template_id;
    j["scheme"] = scheme_name(item.scheme);
    j["seed"] = item.seed;
    return j;
}

QAItem item_from_json(const json& j) {
    try {
        if (!j.is_object()) throw SchemaError("item is not a JSON object", 0);
        if (j.at("v").get<int>() != kSchemaVersion) throw SchemaError("unsupported schema version", 0);
        QAItem item;
        item.id = j.at("id").get<std::string>();
        item.image = j.at("image").get<std::string>();
        item.category = category_from_name(j.at("category").get<std::string>());
        item.question = j.at("question").get<std::string>();
        item.answers.canonical = j.at("answers").at("canonical").get<std::string>();
        item.answers.variants = j.at("answers").at("variants").get<std::vector<std::string>>();
        item.steps = j.at("steps").get<int>();
        item.fact_kind = fact_kind_from_name(j.at("fact_kind").get<std::string>());
        item.template_id = j.at("template_id").get<std::string>();
        item.scheme = scheme_from_name(j.at("scheme").get<std::string>());
        item.seed = j.at("seed").get<std::uint64_t>();
        return item;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed item: ") + e.what(), 0);
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("malformed item: ") + e.what(), 0);
    }
}

std::string item_to_line(const QAItem& item) { return item_to_json(item).dump(); }

void validate_manifest(const DatasetManifest& m, bool check_images) {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < m.items.size(); ++i) {
        const QAItem& it = m.items[i];
        int line = static_cast<int>(i) + 1;
        if (it.id.empty()) throw SchemaError("empty item id", line);
        if (!ids.insert(it.id).second) throw SchemaError("duplicate item id '" + it.id + "'", line);
        if (it.category != classify_fact(it.fact_kind)) throw SchemaError("category does not match fact kind", line);
        if (it.answers.variants.empty()) throw SchemaError("empty answer set", line);
        if (std::find(it.answers.variants.begin(), it.answers.variants.end(), it.answers.canonical) == it.answers.variants.end())
            throw SchemaError("canonical answer missing from variants", line);
        if (it.steps != 1 && it.steps != 2) throw SchemaError("steps must be 1 or 2", line);
        if (check_images && !std::filesystem::exists(std::filesystem::path(m.images_dir) / it.image))
            throw SchemaError("image file '" + it.image + "' not found in " + m.images_dir, line);
    }
}

void write_dataset(const DatasetManifest& m, const std::string& path) {
    std::string body;
    for (const auto& item : m.items) body += item_to_line(item) + "\n";
    write_file(path, body);
    ordered_json meta;
    meta["v"] = kSchemaVersion;
    meta["images_dir"] = m.images_dir;
    meta["created_with"] = m.created_with;
    write_file(meta_path(path), meta.dump(2) + "\n");
}

DatasetManifest read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset " + path);
    DatasetManifest m;
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError(std::string("invalid JSON: ") + e.what(), no);
        }
        try {
            m.items.push_back(item_from_json(j));
        } catch (const SchemaError& e) {
            throw SchemaError(e.what(), no);
        }
    }
    if (std::filesystem::exists(meta_path(path))) {
        try {
            json meta = json::parse(read_file(meta_path(path)));
            m.images_dir = meta.value("images_dir", std::string());
            m.created_with = meta.value("created_with", std::string());
        } catch (const json::exception& e) {
            throw SchemaError(std::string("invalid manifest metadata: ") + e.what(), 0);
        }
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < m.items.size(); ++i)
        if (!ids.insert(m.items[i].id).second) throw SchemaError("duplicate item id '" + m.items[i].id + "'", 0);
    return m;
}

// ---------------------------------------------------------------------------
// Statistics and splits

StatsReport dataset_stats(const DatasetManifest& m) {
    StatsReport r;
    for (Category c : {Category::Position, Category::Shape, Category::Relationship}) r.per_category[c] = 0;
    for (IdentifierScheme s : {IdentifierScheme::Common, IdentifierScheme::Random}) r.per_scheme[s] = 0;
    std::set<std::string> images;
    for (const auto& it : m.items) {
        ++r.per_category[it.category];
        ++r.per_scheme[it.scheme];
        ++r.per_kind[it.fact_kind];
        r.two_step += it.steps == 2;
        images.insert(it.image);
    }
    r.total = m.items.size();
    r.images = images.size();
    return r;
}

std::string format_stats(const StatsReport& r) {
    std::ostringstream o;
    auto row = [&](std::string_view label, std::size_t n) {
        o << label;
        for (std::size_t i = label.size(); i < 18; ++i) o << ' ';
        o << n << "\n";
    };
    o << "Category          Questions\n";
    for (const auto& [c, n] : r.per_category) row(category_name(c), n);
    row("Total Questions", r.total);
    o << "\n";
    row("Images", r.images);
    for (const auto& [s, n] : r.per_scheme) row(std::string("Scheme ") + std::string(scheme_name(s)), n);
    row("Two-step", r.two_step);
    return o.str();
}

BiasSplits make_bias_splits(const DatasetManifest& m, std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> common, random;
    for (std::size_t i = 0; i < m.items.size(); ++i)
        (m.items[i].scheme == IdentifierScheme::Common ? common : random).push_back(i);
    if (common.size() < n || random.size() < n)
        throw std::invalid_argument("insufficient items for splits of " + std::to_string(n) + ": " +
                                    std::to_string(common.size()) + " common, " + std::to_string(random.size()) +
                                    " random available");
    Rng rng(mix_seed(seed, 0x5b1175));
    rng.shuffle(common);
    rng.shuffle(random);
    // Hybrid draws from what the pure splits left over first, then reuses.
    auto pick = [](const std::vector<std::size_t>& pool, std::size_t used, std::size_t k) {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < k; ++i) out.push_back(pool[(used + i) % pool.size()]);
        return out;
    };
    std::size_t half_c = (n + 1) / 2, half_r = n / 2;
    auto build = [&](std::vector<std::size_t> idx) {
        DatasetManifest d;
        d.images_dir = m.images_dir;
        d.created_with = m.created_with;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return m.items[a].id < m.items[b].id; });
        for (std::size_t i : idx) d.items.push_back(m.items[i]);
        return d;
    };
    BiasSplits out;
    out.common = build(pick(common, 0, n));
    out.random = build(pick(random, 0, n));
    std::vector<std::size_t> mix = pick(common, n, half_c);
    for (std::size_t i : pick(random, n, half_r)) mix.push_back(i);
    out.hybrid = build(mix);
    return out;
}

// ---------------------------------------------------------------------------
// Scenes

json fact_to_json(const Fact& f) {
    json subjects = json::array();
    for (const auto& r : f.subjects) subjects.push_back(ref_to_string(r));
    return json{{"category", category_name(f.category)},
                {"kind", fact_kind_name(f.kind)},
                {"subjects", subjects},
                {"target", ref_to_string(f.answer_target)},
                {"witness", f.witness},
                {"derivation", derivation_name(f.derivation)}};
}

Fact fact_from_json(const json& j) {
    Fact f;
    f.category = category_from_name(j.at("category").get<std::string>());
    f.kind = fact_kind_from_name(j.at("kind").get<std::string>());
    for (const auto& r : j.at("subjects")) f.subjects.push_back(ref_from_string(r.get<std::string>()));
    f.answer_target = ref_from_string(j.at("target").get<std::string>());
    f.witness = j.at("witness").get<double>();
    f.derivation = derivation_from_name(j.at("derivation").get<std::string>());
    return f;
}

std::string scene_to_json(const ConcreteScene& s, const std::vector<Fact>& facts, const std::string& image) {
    json points = json::object();
    for (const auto& [c, v] : s.coords) points[std::string(1, c)] = json::array({v.x, v.y});
    json elements = json::array();
    for (const auto& e : s.elements) {
        json je{{"kind", element_kind_name(e.kind)}, {"points", e.points}};
        if (e.kind == ElementKind::Circle) je["radius"] = e.radius;
        if (e.kind == ElementKind::Segment || e.kind == ElementKind::Line || e.kind == ElementKind::Ray)
            je["direction"] = json::array({e.direction.x, e.direction.y});
        elements.push_back(je);
    }
    json jf = json::array();
    for (const auto& f : facts) jf.push_back(fact_to_json(f));
    json doc{{"v", kSchemaVersion},
             {"id", s.id()},
             {"template", s.program.name},
             {"scheme", scheme_name(s.scheme)},
             {"seed", s.seed},
             {"canvas", {{"width", s.canvas.width}, {"height", s.canvas.height}}},
             {"program", print_program(s.program)},
             {"points", points},
             {"elements", elements},
             {"solver",
              {{"restarts_used", s.solver.restarts_used},
               {"final_residual", s.solver.final_residual},
               {"converged", s.solver.converged}}},
             {"facts", jf},
             {"image", image}};
    return doc.dump(2) + "\n";
}

SceneDocument scene_from_json(std::string_view text) {
    try {
        json doc = json::parse(text);
        if (doc.at("v").get<int>() != kSchemaVersion) throw SchemaError("unsupported scene schema version", 0);
        SceneDocument out;
        ConcreteScene& s = out.scene;
        s.program = parse_program(doc.at("program").get<std::string>());
        s.scheme = scheme_from_name(doc.at("scheme").get<std::string>());
        s.seed = doc.at("seed").get<std::uint64_t>();
        s.canvas.width = doc.at("canvas").at("width").get<double>();
        s.canvas.height = doc.at("canvas").at("height").get<double>();
        for (const auto& [k, v] : doc.at("points").items()) s.coords[k.at(0)] = {v.at(0).get<double>(), v.at(1).get<double>()};
        for (const auto& je : doc.at("elements")) {
            Element e;
            e.kind = element_kind_from_name(je.at("kind").get<std::string>());
            e.points = je.at("points").get<std::string>();
            e.radius = je.value("radius", 0.0);
            if (je.contains("direction")) e.direction = {je["direction"].at(0).get<double>(), je["direction"].at(1).get<double>()};
            s.elements.push_back(std::move(e));
        }
        const auto& sol = doc.at("solver");
        s.solver.restarts_used = sol.at("restarts_used").get<int>();
        s.solver.final_residual = sol.at("final_residual").get<double>();
        s.solver.converged = sol.at("converged").get<bool>();
        for (const auto& jf : doc.at("facts")) out.facts.push_back(fact_from_json(jf));
        out.image = doc.at("image").get<std::string>();
        return out;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed scene document: ") + e.what(), 0);
    }
}

}  // namespace georef
