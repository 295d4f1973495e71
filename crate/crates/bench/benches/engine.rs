use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use nlpre_bench::{eval_input, paragraphs};
use nlpre_core::eval::{evaluate, MetricId};
use nlpre_core::parse_conllu;
use nlpre_core::split::{split, SplitSpec};

fn parse(c: &mut Criterion) {
    let mut group = c.benchmark_group("parse");
    for sentences in [100, 1000] {
        let input = eval_input(sentences);
        group.throughput(Throughput::Bytes(input.gold_text.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(sentences), &input.gold_text, |b, text| {
            b.iter(|| parse_conllu(black_box(text)).unwrap())
        });
    }
    group.finish();
}

fn evaluate_all(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate");
    let tasks = MetricId::all();
    for sentences in [100, 1000] {
        let input = eval_input(sentences);
        group.throughput(Throughput::Elements(input.gold.word_count() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(sentences), &input, |b, input| {
            b.iter(|| evaluate(black_box(&input.gold), black_box(&input.system), &tasks).unwrap())
        });
    }
    group.finish();
}

fn split_corpus(c: &mut Criterion) {
    let mut group = c.benchmark_group("split");
    let corpus = paragraphs(10_000);
    for (name, stratify_by_type) in [("by_name", false), ("by_type", true)] {
        let spec = SplitSpec {
            stratify_by_type,
            ..SplitSpec::default()
        };
        group.bench_function(name, |b| b.iter(|| split(black_box(&corpus), &spec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, parse, evaluate_all, split_corpus);
criterion_main!(benches);
