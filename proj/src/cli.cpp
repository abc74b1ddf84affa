#include "ehrtl/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>

#include "ehrtl/api.hpp"
#include "ehrtl/errors.hpp"
#include "ehrtl/pipeline.hpp"
#include "ehrtl/store.hpp"

namespace ehrtl::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
    int verbosity = 0;

    // ingest
    std::vector<std::string> inputs;
    std::vector<std::string> patient_files;
    std::vector<std::string> outcome_files;
    std::string rules_path;
    std::string out_path;
    std::string rejections_path;
    std::string separator = "|";
    bool strict = false;

    // validate / export-graph / serve
    std::string dataset_path;

    // gen
    SyntheticSpec gen;
    std::string gen_start;

    // serve
    std::string listen = "127.0.0.1:8080";
    std::string config_path;
    std::string static_dir;
    std::string groups_path;
};

/// Writes via a temporary file so a failed command leaves no partial output.
template <class Fn>
void write_atomically(const std::string& path, Fn&& fn) {
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write '" + path + "'");
        fn(out);
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw InputError("write failed for '" + path + "'");
        }
    }
    fs::rename(tmp, target);
}

int cmd_ingest(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.separator.size() != 1) {
        err << "error: --separator must be a single character\n";
        return kUsage;
    }
    // everything is checked before any output is produced
    const NormalizationRules rules =
        o.rules_path.empty() ? NormalizationRules::builtin() : NormalizationRules::load(o.rules_path);
    for (const auto* list : {&o.inputs, &o.patient_files, &o.outcome_files})
        for (const auto& p : *list)
            if (!fs::is_regular_file(p)) throw InputError("input '" + p + "' does not exist");

    IngestInputs inputs{o.inputs, o.patient_files, o.outcome_files, o.separator[0]};
    auto run = run_ingest(inputs, rules);
    const auto& report = run.report;

    write_ingest_summary(out, report);
    if (o.verbosity > 0) {
        for (const auto& i : report.issues) err << "warning: " << i.file << ':' << i.line << ": " << i.message << '\n';
        for (const auto& r : report.rejections)
            err << "rejected: " << r.source << ':' << r.line << ": " << to_string(r.reason) << ": " << r.detail << '\n';
    }
    if (!o.rejections_path.empty())
        write_atomically(o.rejections_path, [&](std::ostream& f) { write_rejection_report(f, report.rejections, o.separator[0]); });

    if (o.strict && report.rejected() > 0) {
        err << "error: " << report.rejected() << " rejected record(s) under --strict; dataset not written\n";
        return kFailed;
    }
    write_atomically(o.out_path, [&](std::ostream& f) { save(run.dataset, f); });
    out << "patients:    " << run.dataset.patients.size() << '\n' << "wrote " << o.out_path << '\n';
    return kOk;
}

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
    std::ifstream in(o.dataset_path, std::ios::binary);
    if (!in) throw InputError("cannot open dataset '" + o.dataset_path + "'");
    const auto violations = validate_file(in);
    for (const auto& v : violations) {
        err << o.dataset_path;
        if (v.line > 0) err << ':' << v.line;
        err << ": " << v.message << '\n';
    }
    if (!violations.empty()) {
        out << violations.size() << " violation(s)\n";
        return kFailed;
    }
    out << "ok\n";
    return kOk;
}

int cmd_export_graph(const Options& o, std::ostream& out, std::ostream&) {
    const auto dataset = load(o.dataset_path);
    GraphCounts counts;
    write_atomically(o.out_path, [&](std::ostream& f) { counts = export_graph(dataset, f); });
    out << "nodes: " << counts.nodes << '\n' << "edges: " << counts.edges << '\n';
    return kOk;
}

int cmd_gen(Options o, std::ostream& out, std::ostream& err) {
    if (!o.gen_start.empty()) {
        auto d = parse_iso_day(o.gen_start);
        if (!d) {
            err << "error: --start must be yyyy-MM-dd\n";
            return kUsage;
        }
        o.gen.start = *d;
    }
    Dataset dataset;
    try {
        dataset = generate_synthetic(o.gen);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    write_atomically(o.out_path, [&](std::ostream& f) { save(dataset, f); });
    out << "patients: " << dataset.patients.size() << '\n' << "results:  " << dataset.results.size() << '\n';
    return kOk;
}

bool split_listen(const std::string& listen, std::string& host, int& port) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) return false;
    host = listen.substr(0, colon);
    if (host.empty()) host = "127.0.0.1";
    try {
        std::size_t used = 0;
        port = std::stoi(listen.substr(colon + 1), &used);
        return used == listen.size() - colon - 1 && port >= 0 && port <= 65535;
    } catch (const std::exception&) {
        return false;
    }
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
    std::string host;
    int port = 0;
    if (!split_listen(o.listen, host, port)) {
        err << "error: --listen must be host:port\n";
        return kUsage;
    }
    auto dataset = std::make_shared<const Dataset>(load(o.dataset_path));
    auto config = o.config_path.empty() ? std::make_shared<ConfigStore>() : ConfigStore::open(o.config_path);
    GroupTable groups = o.groups_path.empty() ? GroupTable{} : GroupTable::load(o.groups_path);
    ApiService service(dataset, config, std::move(groups));
    HttpServer server(service, o.static_dir.empty() ? std::nullopt : std::optional<std::string>(o.static_dir));

    const int bound = server.bind(host, port);

    // Handle SIGINT/SIGTERM on a dedicated thread; server threads inherit the mask.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::atomic<bool> signalled{false};
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        signalled = true;
        server.stop();
    });

    out << "serving " << dataset->patients.size() << " patient(s) on http://" << host << ':' << bound << "/v1\n"
        << std::flush;
    server.serve();
    if (!signalled) pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
    out << "stopped\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Lab-result timeline engine: ingest, validate, export, generate and serve."};
    app.name(args.empty() ? "ehr-timeline" : fs::path(args[0]).filename().string());
    app.require_subcommand(1);
    app.add_flag("-v,--verbose", o.verbosity, "Print warnings and each rejected record");

    auto* ingest = app.add_subcommand("ingest", "Normalize raw lab files into a dataset");
    ingest->add_option("inputs", o.inputs, "Pipe-delimited result files")->required()->check(CLI::ExistingFile);
    ingest->add_option("--patients", o.patient_files, "Patient files: patient_id|sex|age or birth year");
    ingest->add_option("--outcomes", o.outcome_files, "Outcome files: patient_id|date|status");
    ingest->add_option("--rules", o.rules_path, "Normalization rules JSON (default: builtin)")->envname("EHR_RULES");
    ingest->add_option("-o,--out", o.out_path, "Dataset file to write")->required()->envname("EHR_DATASET");
    ingest->add_option("--rejections", o.rejections_path, "Write rejected records to this file");
    ingest->add_option("--separator", o.separator, "Field separator")->capture_default_str();
    ingest->add_flag("--strict", o.strict, "Fail without writing the dataset if any record is rejected");

    auto* validate = app.add_subcommand("validate", "Check a dataset file for corruption and invariant violations");
    validate->add_option("dataset", o.dataset_path, "Dataset file")->envname("EHR_DATASET")->required();

    auto* graph = app.add_subcommand("export-graph", "Export patients and tests as a JSON graph");
    graph->add_option("dataset", o.dataset_path, "Dataset file")->envname("EHR_DATASET")->required();
    graph->add_option("-o,--out", o.out_path, "Graph JSON file to write")->required();

    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    gen->add_option("--seed", o.gen.seed, "Random seed")->capture_default_str();
    gen->add_option("--patients", o.gen.n_patients, "Number of patients")->capture_default_str();
    gen->add_option("--tests", o.gen.n_tests, "Tests drawn from the catalog")->capture_default_str();
    gen->add_option("--days", o.gen.day_span, "Days covered")->capture_default_str();
    gen->add_option("--out-of-range", o.gen.out_of_range_fraction, "Fraction of values outside the reference range")
        ->capture_default_str();
    gen->add_option("--start", o.gen_start, "First day, yyyy-MM-dd (default 2020-03-01)");
    gen->add_flag("--long-patient", o.gen.long_patient, "Add patient P0000 with 46 tests over 448 days");
    gen->add_option("-o,--out", o.out_path, "Dataset file to write")->required();

    auto* serve = app.add_subcommand("serve", "Serve the JSON API (and optional static UI)");
    serve->add_option("dataset", o.dataset_path, "Dataset file")->envname("EHR_DATASET")->required();
    serve->add_option("--listen", o.listen, "host:port, port 0 picks a free one")
        ->envname("EHR_LISTEN")
        ->capture_default_str();
    serve->add_option("--config", o.config_path, "Presentation config sidecar (created on first PUT)")
        ->envname("EHR_CONFIG");
    serve->add_option("--static", o.static_dir, "Directory with UI assets mounted at /")->check(CLI::ExistingDirectory);
    serve->add_option("--groups", o.groups_path, "Group table file (default: builtin)")->check(CLI::ExistingFile);

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    try {
        if (*ingest) return cmd_ingest(o, out, err);
        if (*validate) return cmd_validate(o, out, err);
        if (*graph) return cmd_export_graph(o, out, err);
        if (*gen) return cmd_gen(o, out, err);
        if (*serve) return cmd_serve(o, out, err);
    } catch (const BindError& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const VersionError& e) {
        err << "error: " << e.what() << '\n';
        return kFailed;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
        return kFailed;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    }
    return kUsage;
}

}  // namespace ehrtl::cli
