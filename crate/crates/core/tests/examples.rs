macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $module() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(unify_scores, "unify_scores.rs");
example!(fit_label_model, "fit_label_model.rs");
example!(compare_aggregators, "compare_aggregators.rs");
example!(noise_aware_training, "noise_aware_training.rs");
example!(evaluate_auc, "evaluate_auc.rs");
example!(simulate_corpus, "simulate_corpus.rs");
example!(end_to_end_pipeline, "end_to_end_pipeline.rs");
