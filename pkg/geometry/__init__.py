from .abstract_body import AbstractConvexBody, Interval
from .bodies import Ball, Box, Polytope, FullSpace, body_from_dict

ConvexBody = AbstractConvexBody
