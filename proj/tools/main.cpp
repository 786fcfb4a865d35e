// vreid: multi-modal vehicle re-identification pipelines over flat files.
// Subcommands generate synthetic camera networks, fit transit statistics,
// produce fused rankings, score them, run the toy trainer and sweep
// hyperparameters. Exit codes: 0 ok, 1 validation failure, 2 I/O failure.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "vreid/io.hpp"
#include "vreid/losses.hpp"
#include "vreid/metrics.hpp"
#include "vreid/pipeline.hpp"
#include "vreid/rerank.hpp"
#include "vreid/retrieval.hpp"
#include "vreid/spatiotemporal.hpp"
#include "vreid/synth.hpp"

namespace fs = std::filesystem;
using namespace vreid;

namespace {

struct QueryGallerySplit {
    std::vector<std::size_t> query;
    std::vector<std::size_t> gallery;
    std::vector<FeatureRecord> query_records;
    std::vector<FeatureRecord> gallery_records;
};

QueryGallerySplit split_by_query_file(const Dataset& ds, const std::string& queries_path) {
    std::vector<std::string> ids = read_id_list(queries_path);
    if (ids.empty()) throw std::runtime_error("query list is empty");

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ds.records.size(); ++i) index[ds.records[i].image_id] = i;

    QueryGallerySplit split;
    std::set<std::size_t> taken;
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw UnknownImageId(id);
        if (!taken.insert(it->second).second)
            throw std::runtime_error("duplicate query id '" + id + "'");
        split.query.push_back(it->second);
    }
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        if (!taken.count(i)) split.gallery.push_back(i);
    if (split.gallery.empty()) throw std::runtime_error("every record is a query; gallery is empty");

    for (std::size_t i : split.query) split.query_records.push_back(ds.records[i]);
    for (std::size_t i : split.gallery) split.gallery_records.push_back(ds.records[i]);
    return split;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : csv) {
        if (ch == ',') {
            out.push_back(detail::trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(detail::trim(cur));
    out.erase(std::remove(out.begin(), out.end(), std::string()), out.end());
    if (out.empty()) throw std::runtime_error("--values is empty");
    return out;
}

Protocol protocol_from_string(const std::string& s) {
    if (s == "cross-camera") return Protocol::cross_camera;
    if (s == "all") return Protocol::all;
    throw std::runtime_error("unknown protocol '" + s + "'");
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    SynthConfig cfg;
};

int run_synth(const SynthArgs& a) {
    SynthData data = generate(a.cfg);
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw IoError("cannot create directory '" + a.out + "': " + ec.message());
    write_synth_dir(a.out, data);
    std::cout << "wrote " << data.dataset.records.size() << " records, "
              << data.graph.cameras().size() << " cameras, " << data.planted_transitions
              << " transitions to " << a.out << "\n";
    return 0;
}

struct FitArgs {
    std::string meta, cameras, out;
};

int run_fit_st(const FitArgs& a) {
    Dataset ds;
    ds.records = parse_metadata(a.meta);
    CameraGraph graph = parse_camera_graph(a.cameras);
    StSamples samples = collect_st_samples(ds, graph);

    STModel model; // alpha/beta/omega defaults
    model.dist_params = fit_log_normal(samples.deltas);
    model.time_params = fit_log_normal(samples.taus);
    save_st_model(a.out, model);
    std::cout << "fitted " << samples.deltas.size() << " distance and " << samples.taus.size()
              << " time samples: mu_delta=" << model.dist_params.mu
              << " sigma_delta=" << model.dist_params.sigma << " mu_tau=" << model.time_params.mu
              << " sigma_tau=" << model.time_params.sigma << "\n";
    return 0;
}

struct RankArgs {
    std::string features, meta, cameras, st, queries, out;
    double omega = -1.0; // negative means "use the model file value"
    bool rerank = false;
    std::size_t k1 = 20, k2 = 6;
    double lambda_rr = 0.3;
    bool rerank_before_fuse = false;
    bool normalize_appearance = false;
};

int run_rank(const RankArgs& a) {
    Dataset ds = load_dataset(a.meta, a.features);
    CameraGraph graph = parse_camera_graph(a.cameras);
    STModel model = load_st_model(a.st);
    if (a.omega >= 0.0) model.omega = a.omega;
    QueryGallerySplit split = split_by_query_file(ds, a.queries);

    DistanceMatrix d_qg = appearance_distances(ds, split.query, split.gallery);
    if (a.normalize_appearance) min_max_normalize_rows(d_qg.values);

    DistanceMatrix fused;
    if (!a.rerank) {
        fused = fuse(d_qg, split.query_records, split.gallery_records, graph, model);
    } else {
        DistanceMatrix d_qq = appearance_distances(ds, split.query, split.query);
        DistanceMatrix d_gg = appearance_distances(ds, split.gallery, split.gallery);
        if (a.normalize_appearance) {
            min_max_normalize_rows(d_qq.values);
            min_max_normalize_rows(d_gg.values);
        }
        if (a.rerank_before_fuse) {
            DistanceMatrix reranked =
                k_reciprocal_rerank(d_qg, d_qq.values, d_gg.values, a.k1, a.k2, a.lambda_rr);
            fused = fuse(reranked, split.query_records, split.gallery_records, graph, model);
        } else {
            DistanceMatrix f_qg = fuse(d_qg, split.query_records, split.gallery_records, graph, model);
            Matrix f_qq =
                fuse(d_qq, split.query_records, split.query_records, graph, model).values;
            Matrix f_gg =
                fuse(d_gg, split.gallery_records, split.gallery_records, graph, model).values;
            fused = k_reciprocal_rerank(f_qg, f_qq, f_gg, a.k1, a.k2, a.lambda_rr);
        }
    }

    write_ranking_csv(a.out, rank(fused));
    std::cout << "ranked " << split.query.size() << " queries against " << split.gallery.size()
              << " gallery images -> " << a.out << "\n";
    return 0;
}

struct EvalArgs {
    std::string ranks, meta, out, protocol = "cross-camera";
    std::size_t max_rank = 50;
};

int run_eval(const EvalArgs& a) {
    std::vector<RankedList> ranking = read_ranking_csv(a.ranks);
    Dataset ds;
    ds.records = parse_metadata(a.meta);
    EvalReport report = evaluate(ranking, ds, protocol_from_string(a.protocol), a.max_rank);
    if (!a.out.empty()) save_report(a.out, report);
    std::cout << "map=" << report.map << " top1=" << report.top(1) << " top5=" << report.top(5)
              << " valid_queries=" << report.num_valid_queries << "\n";
    return 0;
}

struct TrainArgs {
    std::string data, trace;
    EngineConfig cfg;
    ToyTrainOptions opt;
};

int run_train_toy(const TrainArgs& a) {
    Dataset ds = load_dataset(a.data + "/meta.csv", a.data + "/features.bin");
    ToyTrainResult res = train_toy(ds, a.cfg, a.opt);
    if (!a.trace.empty()) write_trace_csv(a.trace, res.trace);
    std::cout << "trained " << a.opt.epochs << " epochs: total " << res.trace.front().total
              << " -> " << res.trace.back().total << "\n";
    return 0;
}

struct SweepArgs {
    std::string param, values, out;
    std::string features, meta, cameras, st, queries;
    std::string protocol = "cross-camera";
    std::size_t max_rank = 50;
    std::size_t epochs = 30;
    double learning_rate = 0.05;
    std::uint64_t seed = 42;
    std::size_t map_c = 16, map_h = 4, map_w = 4;
    std::uint32_t reduction = 4;
    std::uint32_t kernel = 3;
};

EvalReport eval_embeddings(const std::vector<std::vector<double>>& embeddings, const Dataset& ds,
                           const QueryGallerySplit& split, Protocol protocol,
                           std::size_t max_rank) {
    std::vector<std::vector<double>> q, g;
    std::vector<std::string> qids, gids;
    for (std::size_t i : split.query) {
        q.push_back(embeddings[i]);
        qids.push_back(ds.records[i].image_id);
    }
    for (std::size_t j : split.gallery) {
        g.push_back(embeddings[j]);
        gids.push_back(ds.records[j].image_id);
    }
    RankingResult rr = rank(appearance_distances(q, g, qids, gids));
    return evaluate(ranked_lists(rr), ds, protocol, max_rank);
}

int run_sweep(const SweepArgs& a) {
    Dataset ds = load_dataset(a.meta, a.features);
    QueryGallerySplit split = split_by_query_file(ds, a.queries);
    Protocol protocol = protocol_from_string(a.protocol);
    std::vector<std::string> values = split_list(a.values);

    std::ofstream out(a.out);
    if (!out) throw IoError("cannot write '" + a.out + "'");
    out << "value,map,top1,top5\n";
    auto emit = [&](const std::string& value, const EvalReport& r) {
        out << value << "," << fmt_g17(r.map) << "," << fmt_g17(r.top(1)) << ","
            << fmt_g17(r.top(5)) << "\n";
        std::cout << a.param << "=" << value << " map=" << r.map << " top1=" << r.top(1)
                  << " top5=" << r.top(5) << "\n";
    };

    if (a.param == "omega") {
        CameraGraph graph = parse_camera_graph(a.cameras);
        STModel model = load_st_model(a.st);
        DistanceMatrix d_qg = appearance_distances(ds, split.query, split.gallery);
        for (const auto& v : values) {
            double omega;
            if (!detail::parse_double(v, omega) || omega < 0.0)
                throw std::runtime_error("bad omega value '" + v + "'");
            model.omega = omega;
            DistanceMatrix fused =
                fuse(d_qg, split.query_records, split.gallery_records, graph, model);
            emit(v, evaluate(ranked_lists(rank(fused)), ds, protocol, a.max_rank));
        }
    } else if (a.param == "lambda") {
        for (const auto& v : values) {
            EngineConfig cfg;
            cfg.seed = a.seed;
            if (!detail::parse_double(v, cfg.lambda) || cfg.lambda < 0.0)
                throw std::runtime_error("bad lambda value '" + v + "'");
            ToyTrainOptions opt;
            opt.epochs = a.epochs;
            opt.learning_rate = a.learning_rate;
            ToyTrainResult res = train_toy(ds, cfg, opt);

            std::vector<std::vector<double>> embeddings(ds.records.size());
            for (std::size_t i = 0; i < ds.records.size(); ++i) {
                std::vector<double> x(ds.records[i].embedding.begin(),
                                      ds.records[i].embedding.end());
                embeddings[i] = matvec(res.embedder, x);
            }
            emit(v, eval_embeddings(embeddings, ds, split, protocol, a.max_rank));
        }
    } else if (a.param == "parts" || a.param == "attention-order") {
        Rng rng(a.seed);
        AttentionWeights w;
        w.channel = random_channel_weights(a.map_c, a.reduction, rng);
        w.spatial = random_spatial_weights(a.kernel, rng);
        Matrix lift = make_lift(ds.dim, a.map_c, a.map_h, a.map_w, a.seed + 1);

        for (const auto& v : values) {
            AppearanceConfig cfg;
            if (a.param == "parts") {
                double parts;
                if (!detail::parse_double(v, parts) || parts < 1.0)
                    throw std::runtime_error("bad parts value '" + v + "'");
                cfg.parts_h = cfg.parts_w = std::min<std::size_t>(std::size_t(parts), a.map_h);
                cfg.parts_c = std::size_t(parts);
            } else {
                cfg.order = attention_order_from_string(v);
            }
            auto embeddings = embed_dataset_maps(ds, lift, a.map_c, a.map_h, a.map_w, w, cfg);
            emit(v, eval_embeddings(embeddings, ds, split, protocol, a.max_rank));
        }
    } else {
        throw std::runtime_error("unknown sweep parameter '" + a.param + "'");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vehicle re-identification retrieval engine"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic camera-network dataset");
    synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
    synth_cmd->add_option("--identities", synth_args.cfg.n_identities, "number of identities");
    synth_cmd->add_option("--cameras", synth_args.cfg.cameras, "number of cameras");
    synth_cmd->add_option("--per-id", synth_args.cfg.sightings_per_identity,
                          "sightings per identity");
    synth_cmd->add_option("--dim", synth_args.cfg.embedding_dim, "embedding dimension");
    synth_cmd->add_option("--spread", synth_args.cfg.cluster_spread, "identity cluster spread");
    synth_cmd->add_option("--noise", synth_args.cfg.noise_fraction,
                          "fraction of embeddings replaced by noise");
    synth_cmd->add_option("--seed", synth_args.cfg.seed, "generator seed");
    synth_cmd->add_option("--mu-dist", synth_args.cfg.true_dist_params.mu,
                          "log-normal mu of camera distances");
    synth_cmd->add_option("--sigma-dist", synth_args.cfg.true_dist_params.sigma,
                          "log-normal sigma of camera distances");
    synth_cmd->add_option("--mu-time", synth_args.cfg.true_time_params.mu,
                          "log-normal mu of transit times");
    synth_cmd->add_option("--sigma-time", synth_args.cfg.true_time_params.sigma,
                          "log-normal sigma of transit times");
    synth_cmd->add_option("--horizon", synth_args.cfg.time_horizon,
                          "trajectory start-time window");

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit-st", "fit log-normal transit statistics");
    fit_cmd->add_option("--meta", fit_args.meta, "metadata CSV")->required();
    fit_cmd->add_option("--cameras", fit_args.cameras, "camera distance CSV")->required();
    fit_cmd->add_option("--out", fit_args.out, "output model file")->required();

    RankArgs rank_args;
    auto* rank_cmd = app.add_subcommand("rank", "rank gallery images per query");
    rank_cmd->add_option("--features", rank_args.features, "feature file")->required();
    rank_cmd->add_option("--meta", rank_args.meta, "metadata CSV")->required();
    rank_cmd->add_option("--cameras", rank_args.cameras, "camera distance CSV")->required();
    rank_cmd->add_option("--st", rank_args.st, "spatio-temporal model file")->required();
    rank_cmd->add_option("--queries", rank_args.queries, "file with one query image_id per line")
        ->required();
    rank_cmd->add_option("--out", rank_args.out, "ranking CSV output")->required();
    rank_cmd->add_option("--omega", rank_args.omega,
                         "fusion weight (default: value from the model file)");
    rank_cmd->add_flag("--rerank", rank_args.rerank, "apply k-reciprocal re-ranking");
    rank_cmd->add_option("--k1", rank_args.k1, "re-ranking neighborhood size");
    rank_cmd->add_option("--k2", rank_args.k2, "local query expansion size");
    rank_cmd->add_option("--lambda-rr", rank_args.lambda_rr, "re-ranking blend weight");
    rank_cmd->add_flag("--rerank-before-fuse", rank_args.rerank_before_fuse,
                       "re-rank appearance distances, then fuse");
    rank_cmd->add_flag("--normalize-appearance", rank_args.normalize_appearance,
                       "min-max normalize appearance rows before fusing");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "score a ranking CSV");
    eval_cmd->add_option("--ranks", eval_args.ranks, "ranking CSV")->required();
    eval_cmd->add_option("--meta", eval_args.meta, "metadata CSV")->required();
    eval_cmd->add_option("--protocol", eval_args.protocol, "cross-camera or all")
        ->check(CLI::IsMember({"cross-camera", "all"}));
    eval_cmd->add_option("--max-rank", eval_args.max_rank, "CMC curve length");
    eval_cmd->add_option("--out", eval_args.out, "report file");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train-toy", "gradient-descent sanity trainer");
    train_cmd->add_option("--data", train_args.data, "directory with meta.csv + features.bin")
        ->required();
    train_cmd->add_option("--epochs", train_args.opt.epochs, "training epochs");
    train_cmd->add_option("--lambda", train_args.cfg.lambda, "triplet loss weight");
    train_cmd->add_option("--margin", train_args.cfg.margin, "triplet margin");
    train_cmd->add_option("--eps", train_args.cfg.epsilon, "label smoothing");
    train_cmd->add_option("--seed", train_args.cfg.seed, "initialization seed");
    train_cmd->add_option("--lr", train_args.opt.learning_rate, "learning rate");
    train_cmd->add_option("--trace", train_args.trace, "loss trace CSV output");
    train_cmd->add_flag("--bnneck", train_args.opt.use_bnneck,
                        "standardize the classifier-space view");

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a hyperparameter grid");
    sweep_cmd->add_option("--param", sweep_args.param, "omega|lambda|parts|attention-order")
        ->required();
    sweep_cmd->add_option("--values", sweep_args.values, "comma-separated value list")->required();
    sweep_cmd->add_option("--out", sweep_args.out, "sweep CSV output")->required();
    sweep_cmd->add_option("--features", sweep_args.features, "feature file")->required();
    sweep_cmd->add_option("--meta", sweep_args.meta, "metadata CSV")->required();
    sweep_cmd->add_option("--queries", sweep_args.queries, "query id list")->required();
    sweep_cmd->add_option("--cameras", sweep_args.cameras, "camera distance CSV (omega sweep)");
    sweep_cmd->add_option("--st", sweep_args.st, "spatio-temporal model (omega sweep)");
    sweep_cmd->add_option("--protocol", sweep_args.protocol, "cross-camera or all")
        ->check(CLI::IsMember({"cross-camera", "all"}));
    sweep_cmd->add_option("--max-rank", sweep_args.max_rank, "CMC curve length");
    sweep_cmd->add_option("--epochs", sweep_args.epochs, "epochs per lambda run");
    sweep_cmd->add_option("--lr", sweep_args.learning_rate, "learning rate per lambda run");
    sweep_cmd->add_option("--seed", sweep_args.seed, "seed for weights and lifts");
    sweep_cmd->add_option("--map-c", sweep_args.map_c, "lifted map channels");
    sweep_cmd->add_option("--map-h", sweep_args.map_h, "lifted map height");
    sweep_cmd->add_option("--map-w", sweep_args.map_w, "lifted map width");
    sweep_cmd->add_option("--reduction", sweep_args.reduction, "channel attention reduction");
    sweep_cmd->add_option("--kernel", sweep_args.kernel, "spatial attention kernel size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (synth_cmd->parsed()) return run_synth(synth_args);
        if (fit_cmd->parsed()) return run_fit_st(fit_args);
        if (rank_cmd->parsed()) return run_rank(rank_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
        if (train_cmd->parsed()) return run_train_toy(train_args);
        if (sweep_cmd->parsed()) return run_sweep(sweep_args);
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
