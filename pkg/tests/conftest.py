import pytest

from toolrank.library import ApiDoc, Tool, ToolLibrary, render_document
from toolrank.pipeline import RunContext
from toolrank.rerank import HeuristicClassifier
from toolrank.retrieval import DenseRetriever
from toolrank.scoring import EmbeddingDocSim, LexicalScorer, OracleScorer
from toolrank.synth import SynthSpec, generate_synthetic_benchmark


def make_library(spec: dict, seen: set[str] = frozenset()) -> ToolLibrary:
    """spec: tool_id -> (tool_name, category, {api_id: (api_name, description)})."""
    tools, apis = {}, {}
    for tool_id, (tool_name, category, api_spec) in spec.items():
        tool = Tool(
            tool_id=tool_id,
            tool_name=tool_name,
            category=category,
            api_ids=tuple(api_spec),
        )
        tools[tool_id] = tool
        for api_id, (api_name, description) in api_spec.items():
            api = ApiDoc(
                api_id=api_id, tool_id=tool_id, api_name=api_name, description=description
            )
            apis[api_id] = ApiDoc(
                api_id=api_id,
                tool_id=tool_id,
                api_name=api_name,
                description=description,
                document_text=render_document(api, tool),
            )
    library = ToolLibrary(tools=tools, apis=apis, seen_tools=frozenset(seen))
    library.validate()
    return library


@pytest.fixture(scope="session")
def bench():
    return generate_synthetic_benchmark(SynthSpec(seed=0))


@pytest.fixture(scope="session")
def lexical_ctx(bench):
    return RunContext(
        library=bench.library,
        retriever=DenseRetriever(bench.embeddings, bench.library),
        scorer=LexicalScorer(),
        classifier=HeuristicClassifier(),
        doc_sim=EmbeddingDocSim(bench.embeddings),
    )


@pytest.fixture(scope="session")
def oracle_ctx(bench):
    gold = {r.query_id: r.gold_api_ids for r in bench.records}
    return RunContext(
        library=bench.library,
        retriever=DenseRetriever(bench.embeddings, bench.library),
        scorer=OracleScorer(gold, noise_ceiling=0.25, seed=1),
        classifier=HeuristicClassifier(),
        doc_sim=EmbeddingDocSim(bench.embeddings),
    )


@pytest.fixture()
def toy_library():
    return make_library(
        {
            "weather": (
                "WeatherAPI",
                "Weather",
                {
                    "weather_current": ("get_weather", "Current weather."),
                    "weather_forecast": ("get_forecast", "Daily forecast outlook."),
                },
            ),
            "movies": (
                "MovieBase",
                "Entertainment",
                {
                    "movies_search": ("search_movies", "Find movies by name."),
                    "movies_detail": ("movie_details", "Full movie details."),
                },
            ),
        },
        seen={"weather"},
    )
