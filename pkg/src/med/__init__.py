"""Main-event descriptor engine for news articles.

Answers the six journalistic questions (who, what, when, where, why, how)
about the main event of an article, given linguistic annotations produced
by an external NLP service.
"""

__version__ = "0.1.0"
