// Text parsing vs cache decoding for a generated corpus.
#include <benchmark/benchmark.h>

#include "bboost/fixtures.hpp"
#include "bboost/preparse_cache.hpp"
#include "bboost/unit_parser.hpp"

using namespace bboost;

namespace {

const fixtures::Fixture& corpus(std::size_t n) {
  static std::map<std::size_t, fixtures::Fixture> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, fixtures::random_corpus(n, 42)).first;
  return it->second;
}

void BM_ParseText(benchmark::State& state) {
  const auto& f = corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto tree = parse_tree(f.units);
    benchmark::DoNotOptimize(tree);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_DecodeCache(benchmark::State& state) {
  const auto& f = corpus(static_cast<std::size_t>(state.range(0)));
  const auto image = encode_cache(parse_tree(f.units).set);
  for (auto _ : state) {
    auto set = decode_cache(image);
    benchmark::DoNotOptimize(set);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ParseText)->Arg(136)->Arg(250)->Arg(1000);
BENCHMARK(BM_DecodeCache)->Arg(136)->Arg(250)->Arg(1000);
BENCHMARK_MAIN();
