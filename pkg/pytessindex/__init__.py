"""Top-level package"""

__license__ = "MIT"
__description__ = (
    "pytessindex turns dense latent factors into sparse embeddings by tessellating the unit sphere "
    "and prunes top-k inner-product retrieval with an inverted index"
)
