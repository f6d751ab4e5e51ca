"""
@File       : __init__.py
@Description: 

@Time       : 2026/01/13 10:05
@Author     : hcy18
"""
